"""Hot per-pixel kernels with numba-jitted and pure-numpy implementations.

The jitted path is used when numba imports and the env var MAKEUP_NUMBA is
not "0"; both paths produce identical integer/boolean outputs. Float outputs
(bilinear sampling) may differ in the last ulp between paths.
"""

import os

import numpy as np

_want_numba = os.environ.get("MAKEUP_NUMBA", "1").lower() not in ("0", "false", "no")

try:
    if not _want_numba:
        raise ImportError("numba disabled via MAKEUP_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# ---------------------------------------------------------------------------
# binary dilation by an explicit footprint offset list


@njit(cache=True)
def _dilate_scatter(mask, offsets, out):
    h, w = mask.shape
    n = offsets.shape[0]
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                for k in range(n):
                    yy = y + offsets[k, 0]
                    xx = x + offsets[k, 1]
                    if 0 <= yy < h and 0 <= xx < w:
                        out[yy, xx] = True


def _dilate_numba(mask, offsets):
    out = np.zeros_like(mask)
    _dilate_scatter(mask, offsets, out)
    return out


def _dilate_numpy(mask, offsets):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy, dx in offsets:
        ys0, ys1 = max(dy, 0), h + min(dy, 0)
        xs0, xs1 = max(dx, 0), w + min(dx, 0)
        if ys0 >= ys1 or xs0 >= xs1:
            continue
        out[ys0:ys1, xs0:xs1] |= mask[ys0 - dy : ys1 - dy, xs0 - dx : xs1 - dx]
    return out


def dilate_binary(mask: np.ndarray, offsets: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Morphological dilation of a boolean mask by a footprint offset list.

    offsets is an (n, 2) int array of (dy, dx) translates; result pixels are
    the union of the mask translated by each offset, clipped to the frame.
    """
    mask = np.ascontiguousarray(mask, dtype=bool)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    out = mask
    for _ in range(iterations):
        out = _dilate_impl(out, offsets)
    return out


# ---------------------------------------------------------------------------
# cityblock distance to the nearest zero pixel (image border counts as inside)

NO_EXTERIOR = np.iinfo(np.int32).max // 2


@njit(cache=True)
def _distance_chamfer(support, d):
    h, w = support.shape
    for y in range(h):
        for x in range(w):
            d[y, x] = 0 if not support[y, x] else NO_EXTERIOR
    for y in range(h):
        for x in range(w):
            if y > 0 and d[y - 1, x] + 1 < d[y, x]:
                d[y, x] = d[y - 1, x] + 1
            if x > 0 and d[y, x - 1] + 1 < d[y, x]:
                d[y, x] = d[y, x - 1] + 1
    for y in range(h - 1, -1, -1):
        for x in range(w - 1, -1, -1):
            if y < h - 1 and d[y + 1, x] + 1 < d[y, x]:
                d[y, x] = d[y + 1, x] + 1
            if x < w - 1 and d[y, x + 1] + 1 < d[y, x]:
                d[y, x] = d[y, x + 1] + 1


def _distance_numba(support):
    d = np.empty(support.shape, dtype=np.int32)
    _distance_chamfer(support, d)
    return d


def _distance_numpy(support):
    h, w = support.shape
    d = np.where(support, NO_EXTERIOR, 0).astype(np.int32)
    # forward pass: top-down rows, then left-right prefix inside each row
    for y in range(h):
        if y > 0:
            np.minimum(d[y], d[y - 1] + 1, out=d[y])
        js = np.arange(w, dtype=np.int32)
        d[y] = np.minimum.accumulate(d[y] - js) + js
    for y in range(h - 1, -1, -1):
        if y < h - 1:
            np.minimum(d[y], d[y + 1] + 1, out=d[y])
        js = np.arange(w, dtype=np.int32)
        rev = d[y][::-1]
        d[y] = (np.minimum.accumulate(rev - js) + js)[::-1]
    return d


def exterior_distance(support: np.ndarray) -> np.ndarray:
    """Cityblock distance from each pixel to the nearest pixel outside the support.

    Pixels beyond the image border are treated as inside, so a support touching
    the frame edge is not cut off there. Pixels with no reachable exterior get
    the NO_EXTERIOR sentinel.
    """
    support = np.ascontiguousarray(support, dtype=bool)
    d = _distance_impl(support)
    # chamfer relaxation can push sentinel values up by small increments
    d[d >= NO_EXTERIOR] = NO_EXTERIOR
    return d


# ---------------------------------------------------------------------------
# bilinear sampling with clamped borders


@njit(cache=True)
def _bilinear_loop(img, ys, xs, out):
    h, w, c = img.shape
    n = ys.shape[0]
    for i in range(n):
        y = ys[i]
        x = xs[i]
        if y < 0.0:
            y = 0.0
        elif y > h - 1:
            y = h - 1.0
        if x < 0.0:
            x = 0.0
        elif x > w - 1:
            x = w - 1.0
        y0 = int(y)
        x0 = int(x)
        y1 = y0 + 1 if y0 < h - 1 else y0
        x1 = x0 + 1 if x0 < w - 1 else x0
        fy = y - y0
        fx = x - x0
        for k in range(c):
            top = img[y0, x0, k] * (1.0 - fx) + img[y0, x1, k] * fx
            bot = img[y1, x0, k] * (1.0 - fx) + img[y1, x1, k] * fx
            out[i, k] = top * (1.0 - fy) + bot * fy


def _bilinear_numba(img, ys, xs):
    out = np.empty((ys.size, img.shape[2]), dtype=np.float64)
    _bilinear_loop(img, ys.ravel(), xs.ravel(), out)
    return out.reshape(ys.shape + (img.shape[2],))


def _bilinear_numpy(img, ys, xs):
    h, w, _ = img.shape
    y = np.clip(ys, 0.0, h - 1.0)
    x = np.clip(xs, 0.0, w - 1.0)
    y0 = y.astype(np.int64)
    x0 = x.astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (y - y0)[..., None]
    fx = (x - x0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample img (H, W, C) at fractional (ys, xs) locations, clamped to the frame."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    return _bilinear_impl(img, ys, xs)


if USING_NUMBA:
    _dilate_impl = _dilate_numba
    _distance_impl = _distance_numba
    _bilinear_impl = _bilinear_numba
else:
    _dilate_impl = _dilate_numpy
    _distance_impl = _distance_numpy
    _bilinear_impl = _bilinear_numpy
