"""HTTP job service over the pipeline.

Submission is validated up front so malformed requests answer with 4xx; the
job itself runs on a bounded worker pool and streams progress over SSE.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .backends.analytic import AnalyticGaussianBackend
from .backends.base import Backend
from .backends.toy import ToyAttnBackend
from .colors import COMPOSE_ORDER, RegionColorTarget
from .errors import MakeupError, ParameterError, StageError
from .harmonize import CompositionConfig, ConceptPrompt, GuidanceConfig
from .imageio import image_to_png_bytes, labelmap_bytes_to_labelmap, png_bytes_to_image
from .jobstore import JobStore
from .pipeline import (
    MakeupJob,
    MakeupSpec,
    ProgressEvent,
    ReferenceInput,
    derive_source_masks,
    run_makeup,
)
from .regions import KNOWN_REGIONS, LabelMap, MaskConfig, derive_masks
from .schedule import DEFAULT_SCHEDULE

MAX_UPLOAD_BYTES = 8 * 1024 * 1024
MAX_SIDE = 1024

#: Regions a color target may name: every label-map region plus the derived one.
COLORABLE_REGIONS = tuple(sorted(KNOWN_REGIONS | {"eyeshadow"}))

_SPEC_KEYS = {
    "color_targets",
    "concepts",
    "main_prompt",
    "lambda",
    "apply_steps",
    "t_star",
    "inversion_steps",
    "reverse_steps",
    "seed",
    "debug",
    "backend",
}
_TARGET_KEYS = {"region", "color", "alpha"}

BACKENDS = {
    "toy": "per-pixel attention denoiser over prompt tokens",
    "analytic": "closed-form Gaussian denoiser",
}


def parse_spec_document(doc: dict) -> dict:
    """Validate the wire-format spec; returns a normalized copy.

    Raises ParameterError naming the offending field.
    """
    if not isinstance(doc, dict):
        raise ParameterError("spec document must be a JSON object")
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise ParameterError(f"unknown spec field(s): {', '.join(sorted(unknown))}")
    out: dict = {}

    targets = doc.get("color_targets", [])
    if not isinstance(targets, list):
        raise ParameterError("color_targets: expected a list")
    norm_targets = []
    for i, entry in enumerate(targets):
        if not isinstance(entry, dict):
            raise ParameterError(f"color_targets[{i}]: expected an object")
        bad = set(entry) - _TARGET_KEYS
        if bad:
            raise ParameterError(f"color_targets[{i}]: unknown field(s) {', '.join(sorted(bad))}")
        region = entry.get("region")
        if not isinstance(region, str) or region not in COLORABLE_REGIONS:
            raise ParameterError(
                f"color_targets[{i}].region: expected one of {', '.join(COLORABLE_REGIONS)}"
            )
        color = entry.get("color")
        if not isinstance(color, str):
            raise ParameterError(f"color_targets[{i}].color: expected a hex string")
        alpha = entry.get("alpha", 1.0)
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
            raise ParameterError(f"color_targets[{i}].alpha: expected a number")
        # constructing the target validates both the color and the alpha range
        try:
            RegionColorTarget.from_hex(region, color, float(alpha))
        except ParameterError as e:
            raise ParameterError(f"color_targets[{i}]: {e}") from None
        norm_targets.append({"region": region, "color": color, "alpha": float(alpha)})
    out["color_targets"] = norm_targets

    concepts = doc.get("concepts", [])
    if not isinstance(concepts, list):
        raise ParameterError("concepts: expected a list of 'text:weight' strings")
    for i, entry in enumerate(concepts):
        if not isinstance(entry, str):
            raise ParameterError(f"concepts[{i}]: expected a string")
        try:
            ConceptPrompt.parse(entry)
        except ParameterError as e:
            raise ParameterError(f"concepts[{i}]: {e}") from None
    out["concepts"] = list(concepts)

    main_prompt = doc.get("main_prompt", "a photo of a woman")
    if not isinstance(main_prompt, str) or not main_prompt.strip():
        raise ParameterError("main_prompt: expected a nonempty string")
    out["main_prompt"] = main_prompt

    lam = doc.get("lambda", 0.15)
    if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not 0.0 <= float(lam) <= 1.0:
        raise ParameterError(f"lambda: expected a number in [0, 1], got {lam!r}")
    out["lambda"] = float(lam)

    def _int_field(name: str, default: int, lo: int, hi: int) -> int:
        value = doc.get(name, default)
        if not isinstance(value, int) or isinstance(value, bool) or not lo <= value <= hi:
            raise ParameterError(f"{name}: expected an integer in [{lo}, {hi}], got {value!r}")
        return value

    out["apply_steps"] = _int_field("apply_steps", 2, 0, 1000)
    out["t_star"] = _int_field("t_star", 300, 1, DEFAULT_SCHEDULE.T)
    out["inversion_steps"] = _int_field("inversion_steps", 20, 1, out["t_star"])
    out["reverse_steps"] = _int_field("reverse_steps", 30, 1, out["t_star"])
    out["seed"] = _int_field("seed", 0, -(2**31), 2**31 - 1)

    debug = doc.get("debug", False)
    if not isinstance(debug, bool):
        raise ParameterError(f"debug: expected a boolean, got {debug!r}")
    out["debug"] = debug

    backend = doc.get("backend")
    if backend is not None:
        if not isinstance(backend, str) or backend not in BACKENDS:
            raise ParameterError(f"backend: expected one of {', '.join(sorted(BACKENDS))}")
        out["backend"] = backend

    if not out["color_targets"] and not out["concepts"]:
        out["_needs_reference"] = True  # checked against uploads at submit
    return out


def build_makeup_spec(doc: dict, reference: Optional[ReferenceInput]) -> MakeupSpec:
    """Wire-format document (already normalized) to a pipeline spec."""
    targets = tuple(
        RegionColorTarget.from_hex(t["region"], t["color"], t["alpha"])
        for t in doc.get("color_targets", [])
    )
    composition = CompositionConfig.from_entries(
        doc.get("main_prompt", "a photo of a woman"), doc.get("concepts", [])
    )
    guidance = GuidanceConfig(lam=doc.get("lambda", 0.15), apply_steps=doc.get("apply_steps", 2))
    return MakeupSpec(
        color_targets=targets,
        reference=reference,
        composition=composition,
        guidance=guidance,
        t_star=doc.get("t_star", 300),
        inversion_steps=doc.get("inversion_steps", 20),
        reverse_steps=doc.get("reverse_steps", 30),
        seed=doc.get("seed", 0),
        debug=doc.get("debug", False),
    )


def build_backend(backend_id: str) -> Backend:
    if backend_id == "toy":
        return ToyAttnBackend()
    if backend_id == "analytic":
        return AnalyticGaussianBackend(mu0=0.35, sigma0=0.9, schedule=DEFAULT_SCHEDULE)
    raise ParameterError(f"backend: expected one of {', '.join(sorted(BACKENDS))}")


class EventBuffer:
    """Append-only progress log one SSE reader can replay and follow."""

    def __init__(self) -> None:
        self.items: List[dict] = []
        self.cond = threading.Condition()
        self.closed = False

    def push(self, ev: dict) -> None:
        with self.cond:
            self.items.append(ev)
            self.cond.notify_all()

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify_all()


class ServiceState:
    def __init__(self, store_dir, default_backend: str, workers: int, max_upload_bytes: int):
        self.store = JobStore(store_dir)
        self.default_backend = default_backend
        self.executor = ThreadPoolExecutor(max_workers=max(1, workers))
        self.events: Dict[str, EventBuffer] = {}
        self.max_upload_bytes = max_upload_bytes


def _read_upload(upload: UploadFile, state: ServiceState, what: str) -> bytes:
    blob = upload.file.read()
    if len(blob) > state.max_upload_bytes:
        raise HTTPException(413, detail=f"{what} exceeds {state.max_upload_bytes} bytes")
    return blob


def _decode_image(blob: bytes, what: str):
    try:
        img = png_bytes_to_image(blob)
    except MakeupError as e:
        raise HTTPException(400, detail=f"{what}: {e}") from None
    if max(img.shape[:2]) > MAX_SIDE:
        raise HTTPException(413, detail=f"{what} larger than {MAX_SIDE}px per side")
    return img


def _decode_labels(blob: bytes, what: str) -> LabelMap:
    try:
        return labelmap_bytes_to_labelmap(blob)
    except MakeupError as e:
        raise HTTPException(400, detail=f"{what}: {e}") from None


def _submit_time_checks(
    image,
    labelmap: Optional[LabelMap],
    reference: Optional[ReferenceInput],
    spec_doc: dict,
) -> None:
    """Reject size mismatches and absent regions with 422 before queueing."""
    if labelmap is not None and labelmap.grid.shape != image.shape[:2]:
        raise HTTPException(
            422, detail=f"label map {labelmap.grid.shape} does not match image {image.shape[:2]}"
        )
    try:
        masks = derive_source_masks(image, labelmap)
    except MakeupError as e:
        raise HTTPException(422, detail=f"cannot derive source regions: {e}") from None
    for i, target in enumerate(spec_doc.get("color_targets", [])):
        region = target["region"]
        if region not in masks or masks.get(region).is_empty():
            raise HTTPException(
                422, detail=f"color_targets[{i}]: region {region!r} absent from the source"
            )
    if reference is not None:
        try:
            ref_masks = derive_masks(reference.labelmap, MaskConfig())
        except MakeupError as e:
            raise HTTPException(422, detail=f"cannot derive reference regions: {e}") from None
        for side, mask_set in (("source", masks), ("reference", ref_masks)):
            for region in ("skin", "lip", "eye"):
                if region not in mask_set or mask_set.get(region).is_empty():
                    raise HTTPException(
                        422, detail=f"reference transfer needs region {region!r} in the {side}"
                    )


def _execute(state: ServiceState, job_id: str) -> None:
    store = state.store
    rec = store.get(job_id)
    if rec is None or rec.state != "queued":
        return
    buf = state.events.setdefault(job_id, EventBuffer())
    store.update(job_id, state="running", stage="validate")
    try:
        image = png_bytes_to_image(store.read_file(job_id, "input.png"))
        labels_blob = store.read_file(job_id, "labels.png")
        labelmap = labelmap_bytes_to_labelmap(labels_blob) if labels_blob else None
        ref_blob = store.read_file(job_id, "reference.png")
        reference = None
        if ref_blob:
            ref_labels = store.read_file(job_id, "reference_labels.png")
            reference = ReferenceInput(
                image=png_bytes_to_image(ref_blob),
                labelmap=labelmap_bytes_to_labelmap(ref_labels),
            )
        spec = build_makeup_spec(rec.spec, reference)
        backend = build_backend(rec.backend)
        job = MakeupJob(
            source_image=image,
            spec=spec,
            backend=backend,
            labelmap=labelmap,
            use_fixture_segmenter=labelmap is None,
        )

        def on_event(ev: ProgressEvent) -> None:
            # terminal events are pushed below, after the store has committed,
            # so a client reacting to them never races the status endpoint
            if ev.kind in ("done", "failed", "cancelled"):
                return
            store.update(job_id, progress=ev.fraction, stage=ev.stage)
            buf.push(
                {"kind": ev.kind, "stage": ev.stage, "fraction": ev.fraction, "message": ev.message}
            )

        result = run_makeup(job, progress=on_event)
        store.set_result(job_id, image_to_png_bytes(result.output))
        store.update(job_id, state="done", progress=1.0)
        buf.push({"kind": "done", "stage": "decode", "fraction": 1.0, "message": ""})
    except StageError as e:
        store.update(job_id, state="failed", error=str(e), stage=e.stage)
        buf.push({"kind": "failed", "stage": e.stage, "fraction": 0.0, "message": str(e)})
    except Exception as e:  # constructor/config failures outside any stage
        store.update(job_id, state="failed", error=str(e))
        buf.push({"kind": "failed", "stage": "", "fraction": 0.0, "message": str(e)})
    finally:
        buf.close()


def create_app(
    store_dir=None,
    default_backend: Optional[str] = None,
    workers: Optional[int] = None,
    max_upload_bytes: int = MAX_UPLOAD_BYTES,
    requeue_on_start: bool = True,
) -> FastAPI:
    store_dir = store_dir or os.environ.get("MAKEUP_STORE_DIR") or tempfile.mkdtemp(prefix="makeup_jobs_")
    default_backend = default_backend or os.environ.get("MAKEUP_BACKEND", "toy")
    if default_backend not in BACKENDS:
        raise ParameterError(f"MAKEUP_BACKEND must be one of {', '.join(sorted(BACKENDS))}")
    workers = workers if workers is not None else int(os.environ.get("MAKEUP_WORKERS", "2"))
    state = ServiceState(store_dir, default_backend, workers, max_upload_bytes)

    app = FastAPI(title="makeuplab service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.service = state

    @app.exception_handler(MakeupError)
    async def _on_makeup_error(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    for job_id in state.store.reconcile(requeue=requeue_on_start):
        state.events[job_id] = EventBuffer()
        state.executor.submit(_execute, state, job_id)

    @app.post("/api/jobs", status_code=202)
    def submit(
        image: UploadFile = File(...),
        spec: str = Form(...),
        labels: Optional[UploadFile] = File(None),
        reference: Optional[UploadFile] = File(None),
        reference_labels: Optional[UploadFile] = File(None),
    ):
        try:
            doc = json.loads(spec)
        except ValueError as e:
            raise HTTPException(400, detail=f"spec: invalid JSON ({e})") from None
        spec_doc = parse_spec_document(doc)  # MakeupError -> 400 via handler

        image_blob = _read_upload(image, state, "image")
        src = _decode_image(image_blob, "image")
        files = {"input.png": image_blob}

        labelmap = None
        if labels is not None:
            labels_blob = _read_upload(labels, state, "labels")
            labelmap = _decode_labels(labels_blob, "labels")
            files["labels.png"] = labels_blob

        if (reference is None) != (reference_labels is None):
            raise HTTPException(400, detail="reference and reference_labels must come together")
        ref_input = None
        if reference is not None:
            ref_blob = _read_upload(reference, state, "reference")
            ref_img = _decode_image(ref_blob, "reference")
            ref_labels_blob = _read_upload(reference_labels, state, "reference_labels")
            ref_map = _decode_labels(ref_labels_blob, "reference_labels")
            if ref_map.grid.shape != ref_img.shape[:2]:
                raise HTTPException(
                    422,
                    detail=f"reference_labels {ref_map.grid.shape} does not match reference {ref_img.shape[:2]}",
                )
            ref_input = ReferenceInput(image=ref_img, labelmap=ref_map)
            files["reference.png"] = ref_blob
            files["reference_labels.png"] = ref_labels_blob

        if spec_doc.pop("_needs_reference", False) and ref_input is None:
            raise HTTPException(
                400, detail="spec requests no edit: add color_targets, concepts, or a reference"
            )

        _submit_time_checks(src, labelmap, ref_input, spec_doc)

        backend_id = spec_doc.pop("backend", state.default_backend)
        rec = state.store.create(spec_doc, backend_id, files)
        state.events[rec.id] = EventBuffer()
        state.executor.submit(_execute, state, rec.id)
        return {"id": rec.id, "state": "queued"}

    @app.get("/api/jobs/{job_id}")
    def status(job_id: str):
        rec = state.store.get(job_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown job id {job_id!r}")
        return rec.to_document()

    @app.get("/api/jobs/{job_id}/result")
    def result(job_id: str):
        rec = state.store.get(job_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown job id {job_id!r}")
        if rec.state != "done":
            raise HTTPException(409, detail=f"job is {rec.state}, result not available")
        blob = state.store.result_bytes(job_id)
        if blob is None:
            raise HTTPException(409, detail="result file missing")
        return Response(content=blob, media_type="image/png")

    @app.get("/api/jobs/{job_id}/events")
    def events(job_id: str):
        rec = state.store.get(job_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown job id {job_id!r}")

        def sse(ev: dict) -> str:
            return f"data: {json.dumps(ev)}\n\n"

        def generate():
            buf = state.events.get(job_id)
            if buf is None:  # job predates this process; emit a terminal snapshot
                snap = state.store.get(job_id)
                yield sse(
                    {
                        "kind": snap.state,
                        "stage": snap.stage,
                        "fraction": snap.progress,
                        "message": snap.error,
                    }
                )
                return
            i = 0
            while True:
                with buf.cond:
                    if i >= len(buf.items) and not buf.closed:
                        buf.cond.wait(timeout=15.0)
                    items = list(buf.items[i:])
                    closed = buf.closed
                if not items and not closed:
                    yield ": keep-alive\n\n"
                    continue
                for ev in items:
                    yield sse(ev)
                i += len(items)
                if closed and i >= len(buf.items):
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/api/backends")
    def backends():
        return {
            "backends": [{"id": bid, "description": desc} for bid, desc in sorted(BACKENDS.items())],
            "default": state.default_backend,
        }

    @app.get("/api/regions")
    def regions():
        return {
            "regions": sorted(KNOWN_REGIONS),
            "derived": ["eyeshadow"],
            "colorable": list(COLORABLE_REGIONS),
            "compose_order": list(COMPOSE_ORDER),
        }

    return app


def main() -> None:  # pragma: no cover - exercised via `makeup serve`
    import uvicorn

    port = int(os.environ.get("MAKEUP_PORT", "8765"))
    uvicorn.run(create_app(), host="127.0.0.1", port=port)


if __name__ == "__main__":  # pragma: no cover
    main()
