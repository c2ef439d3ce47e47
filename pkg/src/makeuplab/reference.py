"""Reference-image makeup transfer: per-region histogram matching and
eye-region alignment by moment-matched affine plus a smoothed residual field."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .colors import as_image
from .errors import EmptyRegionError, ParameterError, RegistrationError, ShapeMismatchError
from .kernels import bilinear_sample
from .regions import (
    DEFAULT_EYESHADOW_KERNEL,
    RegionMaskSet,
    SoftMask,
    StructuringKernel,
    build_eyeshadow_mask,
    dilate,
    gradation_smooth,
)

DEFAULT_BINS = 256


def _match_channel(src_vals: np.ndarray, ref_vals: np.ndarray, bins: int) -> np.ndarray:
    """Map each source value to the reference value at its own quantile.

    Small regions (at most `bins` pixels) use exact mid-rank quantiles; larger
    ones go through a `bins`-point quantile lookup table. Both paths are the
    identity when ref equals src.
    """
    n = src_vals.size
    ref_sorted = np.sort(ref_vals)
    m = ref_sorted.size
    if n <= bins:
        order = np.sort(src_vals)
        c_less = np.searchsorted(order, src_vals, side="left")
        c_leq = np.searchsorted(order, src_vals, side="right")
        q = (c_less + 0.5 * (c_leq - c_less)) / n
        idx = np.minimum(m - 1, np.floor(q * m).astype(np.int64))
        return ref_sorted[idx]
    levels = (np.arange(bins) + 0.5) / bins
    xs = np.quantile(src_vals, levels)
    ys = np.quantile(ref_vals, levels)
    return np.interp(src_vals, xs, ys)


def histogram_match(
    src_image: np.ndarray,
    src_mask: SoftMask,
    ref_image: np.ndarray,
    ref_mask: SoftMask,
    bins: int = DEFAULT_BINS,
) -> np.ndarray:
    """Align the source region's per-channel distribution to the reference's.

    Matching is computed over mask support; soft weights then blend matched
    against original, so weight-0 pixels are untouched.
    """
    if bins < 2:
        raise ParameterError(f"bins must be >= 2, got {bins}")
    src = as_image(src_image)
    ref = as_image(ref_image)
    s_sup = src_mask.support()
    r_sup = ref_mask.support()
    if src.shape[:2] != s_sup.shape:
        raise ShapeMismatchError(f"src image {src.shape[:2]} vs mask {s_sup.shape}")
    if ref.shape[:2] != r_sup.shape:
        raise ShapeMismatchError(f"ref image {ref.shape[:2]} vs mask {r_sup.shape}")
    if not s_sup.any():
        raise EmptyRegionError(f"source region {src_mask.region!r} is empty")
    if not r_sup.any():
        raise EmptyRegionError(f"reference region {ref_mask.region!r} is empty")

    out = src.copy()
    w = src_mask.grid[s_sup][:, None]
    matched = np.stack(
        [_match_channel(src[s_sup, c], ref[r_sup, c], bins) for c in range(3)], axis=1
    )
    out[s_sup] = src[s_sup] + w * (matched - src[s_sup])
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class AffineTransform:
    """2x3 matrix taking reference (y, x) coordinates to source coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ParameterError(f"affine matrix must be 2x3, got {m.shape}")
        if abs(np.linalg.det(m[:, :2])) < 1e-12:
            raise RegistrationError("affine linear part is singular")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.hstack([np.eye(2), np.zeros((2, 1))]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "AffineTransform":
        lin = self.matrix[:, :2]
        inv = np.linalg.inv(lin)
        return AffineTransform(np.hstack([inv, (-inv @ self.matrix[:, 2])[:, None]]))


def _mask_moments(mask: SoftMask) -> Tuple[np.ndarray, np.ndarray]:
    w = mask.grid
    total = w.sum()
    if total <= 0:
        raise EmptyRegionError(f"region {mask.region!r} has zero mask weight")
    ys, xs = np.nonzero(w)
    wts = w[ys, xs]
    pts = np.stack([ys, xs], axis=1).astype(np.float64)
    c = (pts * wts[:, None]).sum(axis=0) / total
    d = pts - c
    cov = (d[:, :, None] * d[:, None, :] * wts[:, None, None]).sum(axis=0) / total
    return c, cov


def _principal_axes(cov: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-9:
        raise RegistrationError(f"degenerate mask second moments (eigenvalues {evals})")
    # canonical sign: largest-magnitude component of each axis positive
    for k in range(2):
        i = np.argmax(np.abs(evecs[:, k]))
        if evecs[i, k] < 0:
            evecs[:, k] = -evecs[:, k]
    return evals, evecs


def estimate_affine(src_mask: SoftMask, ref_mask: SoftMask) -> AffineTransform:
    """Match centroid and principal second moments of ref onto src."""
    c_s, cov_s = _mask_moments(src_mask)
    c_r, cov_r = _mask_moments(ref_mask)
    ev_s, U_s = _principal_axes(cov_s)
    ev_r, U_r = _principal_axes(cov_r)
    lin = U_s @ np.diag(np.sqrt(ev_s / ev_r)) @ U_r.T
    if np.linalg.det(lin) < 0:
        # registration must not mirror; flip the minor source axis
        U_s = U_s.copy()
        U_s[:, 0] = -U_s[:, 0]
        lin = U_s @ np.diag(np.sqrt(ev_s / ev_r)) @ U_r.T
    shift = c_s - lin @ c_r
    return AffineTransform(np.hstack([lin, shift[:, None]]))


@dataclass(frozen=True)
class DisplacementField:
    """Per-pixel (dy, dx) offsets in the source frame."""

    field: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.field, dtype=np.float64)
        if f.ndim != 3 or f.shape[2] != 2:
            raise ParameterError(f"field must be H x W x 2, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ParameterError("field contains non-finite values")
        object.__setattr__(self, "field", f)

    def jacobian_determinant(self) -> np.ndarray:
        """det of d(identity + field)/d(y, x) via central differences."""
        dy_dy, dy_dx = np.gradient(self.field[..., 0])
        dx_dy, dx_dx = np.gradient(self.field[..., 1])
        return (1.0 + dy_dy) * (1.0 + dx_dx) - dy_dx * dx_dy

    def is_diffeomorphic(self) -> bool:
        return bool(np.all(self.jacobian_determinant() > 0))


def _resample(grid: np.ndarray, coords_y: np.ndarray, coords_x: np.ndarray) -> np.ndarray:
    planes = np.ascontiguousarray(grid, dtype=np.float64)[..., None]
    return bilinear_sample(planes, coords_y, coords_x)[..., 0]


def warp_mask(
    mask_grid: np.ndarray,
    affine: AffineTransform,
    field: Optional[DisplacementField] = None,
    out_shape: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """Pull a reference-frame grid into the source frame.

    out(p) = grid(affine^-1(p + v(p))); v defaults to zero. out_shape sets the
    source-frame size when it differs from the reference's.
    """
    h, w = out_shape if out_shape is not None else mask_grid.shape[:2]
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    if field is not None:
        ys = ys + field.field[..., 0]
        xs = xs + field.field[..., 1]
    pts = np.stack([ys.ravel(), xs.ravel()], axis=1)
    src_pts = affine.inverse().apply(pts)
    return _resample(mask_grid, src_pts[:, 0], src_pts[:, 1]).reshape(h, w)


def diffeo_refine(
    src_mask: SoftMask,
    warped_ref_mask: SoftMask,
    smoothing: float = 2.0,
    max_iters: int = 60,
    step: float = 2.0,
    tol: float = 1e-4,
) -> DisplacementField:
    """Estimate a smooth residual field aligning the warped reference mask to
    the source mask.

    Gradient-descent on the squared mask mismatch with Gaussian smoothing of
    the field each iteration keeps displacements small and the Jacobian of
    (identity + field) positive; a violation after smoothing is an error.
    """
    if smoothing <= 0:
        raise ParameterError(f"smoothing must be > 0, got {smoothing}")
    fixed = src_mask.grid
    moving = warped_ref_mask.grid
    if fixed.shape != moving.shape:
        raise ShapeMismatchError(f"mask shapes differ: {fixed.shape} vs {moving.shape}")
    overlap = (fixed > 0) & (moving > 0)
    if not overlap.any():
        raise RegistrationError("masks do not overlap after affine alignment")

    h, w = fixed.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    v = np.zeros((h, w, 2))
    prev_err = np.inf
    for _ in range(max_iters):
        m_w = _resample(moving, (ys + v[..., 0]).ravel(), (xs + v[..., 1]).ravel()).reshape(h, w)
        diff = m_w - fixed
        err = float(np.mean(diff**2))
        if prev_err - err < tol * max(prev_err, 1e-12):
            break
        prev_err = err
        gy, gx = np.gradient(m_w)
        v[..., 0] -= step * diff * gy
        v[..., 1] -= step * diff * gx
        v[..., 0] = gaussian_filter(v[..., 0], smoothing)
        v[..., 1] = gaussian_filter(v[..., 1], smoothing)

    out = DisplacementField(field=v)
    if not out.is_diffeomorphic():
        raise RegistrationError("refined field is not orientation-preserving")
    return out


def transfer_reference(
    src_image: np.ndarray,
    src_regions: RegionMaskSet,
    ref_image: np.ndarray,
    ref_regions: RegionMaskSet,
    bins: int = DEFAULT_BINS,
    eye_kernel: StructuringKernel = DEFAULT_EYESHADOW_KERNEL,
    eye_iterations: int = 2,
    smoothing: float = 2.0,
    eyeshadow_decay: float = 0.6,
) -> np.ndarray:
    """Adopt the reference's makeup: match skin and lip distributions, then
    warp the reference eyeshadow band onto the source lids.

    Skin matching excludes the derived eyeshadow band so those pixels are not
    transferred twice.
    """
    for side, regions in (("source", src_regions), ("reference", ref_regions)):
        for name in ("skin", "lip", "eye"):
            if name not in regions or regions.get(name).is_empty():
                raise ParameterError(f"{side} regions missing {name!r}")

    out = as_image(src_image)
    ref = as_image(ref_image)

    skin_grid = src_regions.get("skin").grid.copy()
    if "eyeshadow" in src_regions:
        skin_grid[src_regions.get("eyeshadow").support()] = 0.0
    skin_mask = SoftMask(grid=skin_grid, region="skin")
    out = histogram_match(out, skin_mask, ref, ref_regions.get("skin"), bins)
    out = histogram_match(out, src_regions.get("lip"), ref, ref_regions.get("lip"), bins)

    # eye band: align dilated ref eye onto dilated src eye, then pull
    # reference pixels through the composite warp
    src_dil = dilate(src_regions.get("eye"), eye_kernel, eye_iterations)
    ref_dil = dilate(ref_regions.get("eye"), eye_kernel, eye_iterations)
    out_shape = src_dil.grid.shape
    try:
        affine = estimate_affine(src_dil, ref_dil)
        warped0 = SoftMask(grid=warp_mask(ref_dil.grid, affine, out_shape=out_shape), region="eye")
        field = diffeo_refine(src_dil, warped0, smoothing)
    except (RegistrationError, EmptyRegionError) as e:
        raise RegistrationError(f"eye alignment failed: {e}") from e

    warped_ref = np.stack(
        [warp_mask(ref[..., c], affine, field, out_shape=out_shape) for c in range(3)], axis=-1
    )
    band = build_eyeshadow_mask(src_regions.get("eye"), kernel=eye_kernel, iterations=eye_iterations)
    band = gradation_smooth(band, eyeshadow_decay)
    m = band.grid[..., None]
    out = out + m * (warped_ref - out)
    return np.clip(out, 0.0, 1.0)
