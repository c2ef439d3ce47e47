"""End-to-end job orchestration: invert, estimate, customize in pixel space,
re-noise, and sample back with composition and guidance."""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from .backends.base import Backend, Conditioning, LatencyRecorder
from .colors import RegionColorTarget, as_image, compose_regions
from .errors import (
    CompositionUnsupportedError,
    JobCancelled,
    ParameterError,
    ShapeMismatchError,
    StageError,
)
from .fixtures import fixture_segmenter
from .harmonize import CompositionConfig, GuidanceConfig, guided_reverse_step
from .regions import LabelMap, MaskConfig, RegionMaskSet, derive_masks
from .reference import transfer_reference
from .schedule import (
    DEFAULT_SCHEDULE,
    NoiseSchedule,
    InversionTrace,
    ddim_invert_step,
    renoise,
    timestep_grid,
    tweedie_denoise,
)

#: Algorithm stage names in execution order; the stage log must match.
STAGES = (
    "validate",
    "segment",
    "encode",
    "invert",
    "estimate",
    "transform",
    "renoise",
    "reverse",
    "decode",
)

# progress fraction window per stage; step events interpolate inside
_STAGE_SPAN = {
    "validate": (0.00, 0.02),
    "segment": (0.02, 0.06),
    "encode": (0.06, 0.08),
    "invert": (0.08, 0.45),
    "estimate": (0.45, 0.50),
    "transform": (0.50, 0.55),
    "renoise": (0.55, 0.58),
    "reverse": (0.58, 0.98),
    "decode": (0.98, 1.00),
}


@dataclass(frozen=True)
class ReferenceInput:
    """Reference makeup image plus its label map."""

    image: np.ndarray
    labelmap: LabelMap

    def __post_init__(self):
        img = as_image(self.image)
        if img.shape[:2] != self.labelmap.grid.shape:
            raise ShapeMismatchError(
                f"reference image {img.shape[:2]} vs label map {self.labelmap.grid.shape}"
            )
        object.__setattr__(self, "image", img)


@dataclass(frozen=True)
class MakeupSpec:
    """Everything that defines the requested edit."""

    color_targets: Tuple[RegionColorTarget, ...] = ()
    reference: Optional[ReferenceInput] = None
    composition: CompositionConfig = field(default_factory=CompositionConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    t_star: int = 300
    inversion_steps: int = 20
    reverse_steps: int = 30
    seed: int = 0
    debug: bool = False

    def __post_init__(self):
        object.__setattr__(self, "color_targets", tuple(self.color_targets))
        if not (self.color_targets or self.reference or self.composition.concepts):
            raise ParameterError(
                "spec requests no edit: need color targets, a reference, or concepts"
            )
        if self.t_star < 1:
            raise ParameterError(f"t_star must be >= 1, got {self.t_star}")
        if self.inversion_steps < 1 or self.reverse_steps < 1:
            raise ParameterError("step counts must be >= 1")


@dataclass(frozen=True)
class MakeupJob:
    source_image: np.ndarray
    spec: MakeupSpec
    backend: Backend
    labelmap: Optional[LabelMap] = None
    use_fixture_segmenter: bool = False
    schedule: NoiseSchedule = DEFAULT_SCHEDULE
    mask_config: MaskConfig = field(default_factory=MaskConfig)

    def __post_init__(self):
        img = as_image(self.source_image)
        object.__setattr__(self, "source_image", img)
        if self.labelmap is not None and self.labelmap.grid.shape != img.shape[:2]:
            raise ShapeMismatchError(
                f"label map {self.labelmap.grid.shape} vs image {img.shape[:2]}"
            )
        if self.labelmap is None and not self.use_fixture_segmenter:
            raise ParameterError("job needs a label map or the fixture segmenter")


@dataclass
class ProgressEvent:
    kind: str  # stage | step | done | failed | cancelled
    stage: str
    fraction: float
    message: str = ""


@dataclass
class JobResult:
    output: np.ndarray
    status: str
    stage_log: List[str]
    timings: Dict[str, float]
    denoiser_latencies_ms: List[float]
    intermediates: Dict[str, np.ndarray] = field(default_factory=dict)


def derive_source_masks(
    image: np.ndarray,
    labelmap: Optional[LabelMap],
    mask_config: Optional[MaskConfig] = None,
) -> RegionMaskSet:
    """Region masks for an image, via its label map or the fixture segmenter."""
    if labelmap is None:
        labelmap = fixture_segmenter(image)
    if labelmap.grid.shape != image.shape[:2]:
        raise ShapeMismatchError(
            f"label map {labelmap.grid.shape} vs image {image.shape[:2]}"
        )
    return derive_masks(labelmap, mask_config or MaskConfig())


def segment_or_load(job: MakeupJob) -> RegionMaskSet:
    """Region masks for the job's source image, derived eyeshadow included."""
    return derive_source_masks(job.source_image, job.labelmap, job.mask_config)


def _apply_pixel_transform(
    image: np.ndarray,
    spec: MakeupSpec,
    masks: RegionMaskSet,
    mask_config: MaskConfig,
) -> np.ndarray:
    """Pixel-space customization T: reference transfer first, color targets after."""
    out = image
    if spec.reference is not None:
        ref_masks = derive_masks(spec.reference.labelmap, mask_config)
        out = transfer_reference(out, masks, spec.reference.image, ref_masks)
    if spec.color_targets:
        out = compose_regions(out, spec.color_targets, masks)
    return out


def run_makeup(
    job: MakeupJob,
    progress: Optional[Callable[[ProgressEvent], None]] = None,
    cancel: Optional[threading.Event] = None,
) -> JobResult:
    """Execute the full edit. Deterministic: no randomness anywhere in the
    loop, so identical jobs give bitwise-identical outputs."""
    stage_log: List[str] = []
    timings: Dict[str, float] = {}
    intermediates: Dict[str, np.ndarray] = {}
    recorder = LatencyRecorder(job.backend)

    def emit(kind: str, stage: str, fraction: float, message: str = ""):
        if progress is not None:
            progress(ProgressEvent(kind=kind, stage=stage, fraction=fraction, message=message))

    def check_cancel():
        if cancel is not None and cancel.is_set():
            raise JobCancelled("job cancelled")

    class _stage:
        def __init__(self, name: str):
            self.name = name

        def __enter__(self):
            check_cancel()
            stage_log.append(self.name)
            emit("stage", self.name, _STAGE_SPAN[self.name][0])
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            timings[self.name] = time.perf_counter() - self.t0
            if exc is None:
                return False
            if isinstance(exc, (JobCancelled, StageError)):
                return False
            raise StageError(self.name, str(exc)) from exc

    spec = job.spec
    schedule = job.schedule
    try:
        with _stage("validate"):
            if spec.t_star > schedule.T:
                raise ParameterError(f"t_star {spec.t_star} exceeds schedule T {schedule.T}")
            if spec.inversion_steps > spec.t_star or spec.reverse_steps > spec.t_star:
                raise ParameterError("step counts cannot exceed t_star")
            conditioning = job.backend.encode_text(spec.composition.main_prompt)
            concepts = []
            for cp in spec.composition.concepts:
                concepts.append((job.backend.encode_text(cp.text), cp.alpha))
            if concepts and not job.backend.supports_composition:
                raise CompositionUnsupportedError(
                    f"backend {job.backend.name!r} cannot compose concept prompts"
                )

        with _stage("segment"):
            masks = segment_or_load(job)

        with _stage("encode"):
            x0 = job.source_image
            z0 = job.backend.codec.encode(x0)

        with _stage("invert"):
            grid = timestep_grid(spec.t_star, spec.inversion_steps)
            z = np.asarray(z0, dtype=np.float64)
            lo, hi = _STAGE_SPAN["invert"]
            for i in range(spec.inversion_steps):
                check_cancel()
                t_from, t_to = int(grid[i]), int(grid[i + 1])
                eps = recorder.predict_eps(z, t_to, conditioning)
                z = ddim_invert_step(schedule, z, t_to, eps, t_prev=t_from)
                emit("step", "invert", lo + (hi - lo) * (i + 1) / spec.inversion_steps)
            eps_star = recorder.predict_eps(z, spec.t_star, conditioning)
            trace = InversionTrace(
                z_tstar=z,
                t_star=spec.t_star,
                eps_at_tstar=np.asarray(eps_star, dtype=np.float64),
                conditioning=conditioning,
            )

        with _stage("estimate"):
            zhat0 = tweedie_denoise(schedule, trace.z_tstar, spec.t_star, trace.eps_at_tstar)
            xhat0 = job.backend.codec.decode(zhat0)
            if spec.debug:
                intermediates["xhat0"] = xhat0.copy()

        with _stage("transform"):
            xhat_new = _apply_pixel_transform(xhat0, spec, masks, job.mask_config)
            # guidance anchor is the transformed ORIGINAL image, not xhat0
            x0_transformed = _apply_pixel_transform(x0, spec, masks, job.mask_config)
            z0_prime = job.backend.codec.encode(x0_transformed)
            if spec.debug:
                intermediates["xhat_new"] = xhat_new.copy()
                for name, mask in masks.masks.items():
                    intermediates[f"mask_{name}"] = mask.grid.copy()

        with _stage("renoise"):
            z = renoise(schedule, job.backend.codec.encode(xhat_new), trace)

        with _stage("reverse"):
            reverse_backend = recorder
            if concepts:
                composed = job.backend.with_composition(concepts)
                reverse_backend = LatencyRecorder(composed, recorder.latencies_ms)
            rgrid = timestep_grid(spec.t_star, spec.reverse_steps)
            lo, hi = _STAGE_SPAN["reverse"]
            n = len(rgrid) - 1
            for step_index, i in enumerate(range(n, 0, -1)):
                check_cancel()
                t_hi, t_lo = int(rgrid[i]), int(rgrid[i - 1])
                z = guided_reverse_step(
                    reverse_backend,
                    schedule,
                    z,
                    t_hi,
                    conditioning,
                    z0_prime,
                    spec.guidance,
                    step_index,
                    t_prev=t_lo,
                )
                emit("step", "reverse", lo + (hi - lo) * (step_index + 1) / n)

        with _stage("decode"):
            output = job.backend.codec.decode(z)
            if output.shape != x0.shape:
                raise ShapeMismatchError(f"output {output.shape} vs input {x0.shape}")

    except JobCancelled:
        emit("cancelled", stage_log[-1] if stage_log else "validate", 0.0, "cancelled")
        return JobResult(
            output=job.source_image,
            status="cancelled",
            stage_log=stage_log,
            timings=timings,
            denoiser_latencies_ms=recorder.latencies_ms,
            intermediates=intermediates,
        )
    except StageError as e:
        emit("failed", e.stage, 0.0, str(e))
        raise

    emit("done", "decode", 1.0)
    return JobResult(
        output=output,
        status="done",
        stage_log=stage_log,
        timings=timings,
        denoiser_latencies_ms=recorder.latencies_ms,
        intermediates=intermediates,
    )


def progress_stream(
    job: MakeupJob, cancel: Optional[threading.Event] = None
) -> Iterator[ProgressEvent]:
    """Run the job on a worker thread, yielding progress events as they come.

    The final event is done, failed, or cancelled; nothing follows it.
    """
    q: "queue.Queue[Optional[ProgressEvent]]" = queue.Queue()
    box: Dict[str, object] = {}

    def work():
        try:
            box["result"] = run_makeup(job, progress=q.put, cancel=cancel)
        except StageError:
            pass  # failed event already queued
        except Exception as e:  # pragma: no cover - defensive
            q.put(ProgressEvent(kind="failed", stage="validate", fraction=0.0, message=str(e)))
        finally:
            q.put(None)

    thread = threading.Thread(target=work, daemon=True)
    thread.start()
    while True:
        ev = q.get()
        if ev is None:
            break
        yield ev
    thread.join()
