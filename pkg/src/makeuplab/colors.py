"""Region-mean RGB makeup transform and per-region composition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyRegionError, ParameterError, ShapeMismatchError
from .regions import RegionMaskSet, SoftMask

#: later regions overwrite earlier ones where masks overlap
COMPOSE_ORDER = ("skin", "eyeshadow", "lip")


def as_image(arr) -> np.ndarray:
    """Validate and normalize an H x W x 3 image in [0, 1]."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ParameterError(f"image must be H x W x 3, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ParameterError("image contains non-finite values")
    return np.clip(img, 0.0, 1.0)


def parse_hex_color(text: str) -> np.ndarray:
    """ "#RRGGBB" (hash optional) to an RGB triple in [0, 1]."""
    s = text.strip().lstrip("#")
    if len(s) != 6:
        raise ParameterError(f"expected RRGGBB hex color, got {text!r}")
    try:
        vals = [int(s[i : i + 2], 16) for i in (0, 2, 4)]
    except ValueError:
        raise ParameterError(f"invalid hex color {text!r}") from None
    return np.array(vals, dtype=np.float64) / 255.0


def format_hex_color(rgb) -> str:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape != (3,):
        raise ParameterError(f"color must be an RGB triple, got shape {rgb.shape}")
    return "#" + "".join(f"{int(round(min(max(v, 0.0), 1.0) * 255)):02x}" for v in rgb)


@dataclass(frozen=True)
class RegionColorTarget:
    """Target palette color for one region.

    sigma_policy "equalize" treats the target deviation as equal to the
    source's, reducing the transform to a pure mean shift; "explicit" applies
    the printed sigma_src / sigma_tgt ratio and needs sigma_tgt.
    """

    region: str
    mu_tgt: np.ndarray
    alpha: float = 1.0
    sigma_policy: str = "equalize"
    sigma_tgt: Optional[np.ndarray] = None

    def __post_init__(self):
        mu = np.asarray(self.mu_tgt, dtype=np.float64).reshape(-1)
        if mu.shape != (3,):
            raise ParameterError(f"mu_tgt must be an RGB triple, got shape {mu.shape}")
        if np.any(mu < 0) or np.any(mu > 1):
            raise ParameterError(f"mu_tgt must lie in [0, 1], got {mu}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sigma_policy not in ("equalize", "explicit"):
            raise ParameterError(f"sigma_policy must be equalize or explicit, got {self.sigma_policy!r}")
        object.__setattr__(self, "mu_tgt", mu)
        if self.sigma_policy == "explicit":
            if self.sigma_tgt is None:
                raise ParameterError("explicit sigma policy requires sigma_tgt")
            sig = np.asarray(self.sigma_tgt, dtype=np.float64).reshape(-1)
            if sig.shape != (3,) or np.any(sig <= 0):
                raise ParameterError(f"sigma_tgt must be a positive RGB triple, got {self.sigma_tgt}")
            object.__setattr__(self, "sigma_tgt", sig)

    @classmethod
    def from_hex(cls, region: str, hex_color: str, alpha: float = 1.0, **kw) -> "RegionColorTarget":
        return cls(region=region, mu_tgt=parse_hex_color(hex_color), alpha=alpha, **kw)


def region_stats(image: np.ndarray, mask: SoftMask) -> Tuple[np.ndarray, np.ndarray]:
    """Mask-weighted per-channel mean and standard deviation."""
    img = as_image(image)
    w = mask.grid
    if img.shape[:2] != w.shape:
        raise ShapeMismatchError(f"image {img.shape[:2]} vs mask {w.shape}")
    total = w.sum()
    if total <= 0:
        raise EmptyRegionError(f"region {mask.region!r} has zero mask weight")
    mu = (img * w[..., None]).sum(axis=(0, 1)) / total
    var = (((img - mu) ** 2) * w[..., None]).sum(axis=(0, 1)) / total
    return mu, np.sqrt(var)


def apply_rgb_transfer(image: np.ndarray, mask: SoftMask, target: RegionColorTarget) -> np.ndarray:
    """Shift the masked region's mean toward the target color.

    out(p) = image(p) + m(p) * (T(image)(p) - image(p)), clamped to [0, 1].
    Zero-weight pixels are bit-identical to the input.
    """
    img = as_image(image)
    if target.alpha == 0.0 and target.sigma_policy == "equalize":
        return img
    mu_src, sigma_src = region_stats(img, mask)
    shifted = img - target.alpha * (mu_src - target.mu_tgt)
    if target.sigma_policy == "explicit":
        shifted = (sigma_src / target.sigma_tgt) * shifted
    m = mask.grid[..., None]
    out = np.where(m > 0, img + m * (shifted - img), img)
    return np.clip(out, 0.0, 1.0)


def compose_regions(
    image: np.ndarray,
    targets: Sequence[RegionColorTarget],
    masks: RegionMaskSet,
) -> np.ndarray:
    """Apply targets sequentially, base layers first.

    Order: skin, then eyeshadow, then lip, then anything else in given order;
    each step recomputes stats on the current intermediate, so overlapping
    later regions paint over earlier ones.
    """
    for t in targets:
        if t.region not in masks:
            raise ParameterError(f"no mask available for target region {t.region!r}")
    rank = {name: i for i, name in enumerate(COMPOSE_ORDER)}
    ordered = sorted(targets, key=lambda t: rank.get(t.region, len(COMPOSE_ORDER)))
    out = as_image(image)
    for t in ordered:
        out = apply_rgb_transfer(out, masks.get(t.region), t)
    return out
