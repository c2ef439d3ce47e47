"""Facial-region masks: label-map ingestion, eyeshadow reconstruction by
dilation plus shift, and distance-based gradation smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, ParameterError, ShapeMismatchError
from .kernels import NO_EXTERIOR, dilate_binary, exterior_distance

#: 19-class face-parsing convention; overridable via a mapping file.
DEFAULT_LABEL_MAPPING: Dict[int, str] = {
    0: "background",
    1: "skin",
    2: "brow",
    3: "brow",
    4: "eye",
    5: "eye",
    12: "lip",
    13: "lip",
    17: "hair",
}

#: region names a mapping file may assign; "eyeshadow" is always derived.
KNOWN_REGIONS = frozenset({"background", "skin", "brow", "eye", "lip", "hair", "other"})

DEFAULT_EYESHADOW_ITERATIONS = 2
DEFAULT_EYESHADOW_DECAY = 0.6
DEFAULT_LIP_DECAY = 0.3


@dataclass(frozen=True)
class SoftMask:
    """Per-pixel opacity in [0, 1] for one named region."""

    grid: np.ndarray
    region: str = ""

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 2:
            raise ParameterError(f"mask grid must be 2-D, got shape {g.shape}")
        object.__setattr__(self, "grid", np.clip(g, 0.0, 1.0))

    def support(self) -> np.ndarray:
        return self.grid > 0.0

    def is_empty(self) -> bool:
        return not bool(self.support().any())


@dataclass(frozen=True)
class LabelMap:
    """Integer label grid plus a label -> region-name table."""

    grid: np.ndarray
    mapping: Dict[int, str] = field(default_factory=lambda: dict(DEFAULT_LABEL_MAPPING))

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2 or not np.issubdtype(g.dtype, np.integer):
            raise ParameterError("label grid must be a 2-D integer array")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "mapping", dict(self.mapping))

    def region_of(self, label: int) -> str:
        return self.mapping.get(int(label), "other")

    def region_names(self) -> set:
        present = {self.region_of(v) for v in np.unique(self.grid)}
        return present | set(self.mapping.values())


def parse_mapping_file(text: str) -> Dict[int, str]:
    """Parse "label=region" lines; '#' starts a comment."""
    mapping: Dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"mapping line {lineno}: expected 'label=region', got {raw!r}")
        label_s, region = (part.strip() for part in line.split("=", 1))
        try:
            label = int(label_s)
        except ValueError:
            raise ConfigError(f"mapping line {lineno}: label {label_s!r} is not an integer") from None
        if region not in KNOWN_REGIONS:
            raise ConfigError(
                f"mapping line {lineno}: unknown region {region!r}; known: {sorted(KNOWN_REGIONS)}"
            )
        mapping[label] = region
    if not mapping:
        raise ConfigError("mapping file defines no labels")
    return mapping


def labelmap_to_mask(labelmap: LabelMap, region_name: str) -> SoftMask:
    """Binary mask of pixels whose label maps to region_name.

    A region that is mapped but absent from the image yields an all-zero
    mask; a name outside the mapping's range is an error.
    """
    known = set(labelmap.mapping.values()) | {"other"}
    if region_name not in known:
        raise ParameterError(f"unknown region {region_name!r}; mapped regions: {sorted(known)}")
    hit = np.zeros(labelmap.grid.shape, dtype=bool)
    for label in np.unique(labelmap.grid):
        if labelmap.region_of(label) == region_name:
            hit |= labelmap.grid == label
    return SoftMask(grid=hit.astype(np.float64), region=region_name)


@dataclass(frozen=True)
class StructuringKernel:
    """Dilation footprint: full box, or the center row plus center column."""

    shape: str = "cross"
    size: Tuple[int, int] = (3, 3)

    def __post_init__(self):
        if self.shape not in ("cross", "box"):
            raise ParameterError(f"kernel shape must be cross or box, got {self.shape!r}")
        h, w = self.size
        if h < 1 or w < 1:
            raise ParameterError(f"kernel size must be positive, got {self.size}")

    def footprint(self) -> np.ndarray:
        h, w = self.size
        if self.shape == "box":
            return np.ones((h, w), dtype=bool)
        fp = np.zeros((h, w), dtype=bool)
        fp[:, w // 2] = True
        fp[h // 2, :] = True
        return fp

    def offsets(self) -> np.ndarray:
        """Footprint cell coordinates relative to the anchor (h//2, w//2)."""
        h, w = self.size
        ys, xs = np.nonzero(self.footprint())
        return np.stack([ys - h // 2, xs - w // 2], axis=1).astype(np.int64)


DEFAULT_EYESHADOW_KERNEL = StructuringKernel(shape="cross", size=(12, 7))


def dilate(mask: SoftMask, kernel: StructuringKernel, iterations: int = 1) -> SoftMask:
    """Iterated binary dilation; iterations = 0 is the identity."""
    if iterations < 0:
        raise ParameterError(f"iterations must be >= 0, got {iterations}")
    if iterations == 0:
        return SoftMask(grid=mask.grid.copy(), region=mask.region)
    support = mask.grid > 0.5
    out = dilate_binary(support, kernel.offsets(), iterations)
    return SoftMask(grid=out.astype(np.float64), region=mask.region)


def shift_mask(mask: SoftMask, dy: int, dx: int) -> SoftMask:
    """Integer translation with zero fill outside the frame."""
    h, w = mask.grid.shape
    if abs(dy) >= h or abs(dx) >= w:
        raise ParameterError(f"shift ({dy}, {dx}) exceeds mask dims {(h, w)}")
    out = np.zeros_like(mask.grid)
    src_y = slice(max(0, -dy), min(h, h - dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    out[dst_y, dst_x] = mask.grid[src_y, src_x]
    return SoftMask(grid=out, region=mask.region)


def build_eyeshadow_mask(
    eye_mask: SoftMask,
    kernel: StructuringKernel = DEFAULT_EYESHADOW_KERNEL,
    iterations: int = DEFAULT_EYESHADOW_ITERATIONS,
    shift: Optional[Tuple[int, int]] = None,
) -> SoftMask:
    """Dilate the eye, push the result upward, and carve the eye back out.

    shift defaults to half the kernel height upward, which lands the band on
    the lid for the bundled fixtures.
    """
    if shift is None:
        shift = (-(kernel.size[0] // 2), 0)
    dilated = dilate(eye_mask, kernel, iterations)
    shifted = shift_mask(dilated, shift[0], shift[1])
    grid = np.where(eye_mask.grid > 0.5, 0.0, shifted.grid)
    return SoftMask(grid=grid, region="eyeshadow")


def gradation_smooth(mask: SoftMask, decay_rate: float) -> SoftMask:
    """Fade opacity toward the outer boundary of the mask support.

    Each support pixel is scaled by 1 - exp(-decay_rate * d) where d is its
    city-block distance to the nearest pixel outside the support. The image
    border does not count as outside, so an all-ones mask passes through
    unchanged. Support never grows and values never exceed the input.
    """
    if decay_rate <= 0:
        raise ParameterError(f"decay_rate must be > 0, got {decay_rate}")
    support = mask.grid > 0.0
    if not support.any():
        return SoftMask(grid=np.zeros_like(mask.grid), region=mask.region)
    dist = exterior_distance(support)
    # weights in float via numpy only, so both kernel paths agree bitwise
    with np.errstate(under="ignore"):
        weight = 1.0 - np.exp(-decay_rate * dist.astype(np.float64))
    weight[~support] = 0.0
    weight[dist >= NO_EXTERIOR] = 1.0
    return SoftMask(grid=mask.grid * weight, region=mask.region)


@dataclass(frozen=True)
class MaskConfig:
    """Knobs for derived-mask construction."""

    eyeshadow_kernel: StructuringKernel = DEFAULT_EYESHADOW_KERNEL
    eyeshadow_iterations: int = DEFAULT_EYESHADOW_ITERATIONS
    eyeshadow_shift: Optional[Tuple[int, int]] = None
    eyeshadow_decay: float = DEFAULT_EYESHADOW_DECAY
    lip_decay: float = DEFAULT_LIP_DECAY


@dataclass
class RegionMaskSet:
    """All masks for one working image, including derived ones."""

    masks: Dict[str, SoftMask]
    shape: Tuple[int, int]

    def get(self, region: str) -> SoftMask:
        if region not in self.masks:
            raise ParameterError(f"no mask for region {region!r}; have {sorted(self.masks)}")
        return self.masks[region]

    def __contains__(self, region: str) -> bool:
        return region in self.masks


def derive_masks(labelmap: LabelMap, config: MaskConfig = MaskConfig()) -> RegionMaskSet:
    """Ingest raw region masks, then add the smoothed eyeshadow band and the
    smoothed lip mask. Raw binary masks stay available under their own names;
    smoothing products replace lip and add eyeshadow."""
    masks: Dict[str, SoftMask] = {}
    for region in sorted(set(labelmap.mapping.values()) | {"other"}):
        masks[region] = labelmap_to_mask(labelmap, region)

    if "eye" in masks and not masks["eye"].is_empty():
        band = build_eyeshadow_mask(
            masks["eye"],
            kernel=config.eyeshadow_kernel,
            iterations=config.eyeshadow_iterations,
            shift=config.eyeshadow_shift,
        )
        masks["eyeshadow"] = gradation_smooth(band, config.eyeshadow_decay)
    else:
        masks["eyeshadow"] = SoftMask(grid=np.zeros(labelmap.grid.shape), region="eyeshadow")

    if "lip" in masks and not masks["lip"].is_empty():
        masks["lip"] = gradation_smooth(masks["lip"], config.lip_decay)

    return RegionMaskSet(masks=masks, shape=tuple(labelmap.grid.shape))
