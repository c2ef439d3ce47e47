"""Deterministic synthetic face fixtures and a palette-rule segmenter.

Shapes are drawn at half resolution and upsampled 2x, so every region
boundary lands on an even pixel grid and the pooling codec round-trips the
fixture exactly.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ParameterError
from .regions import LabelMap

#: region -> display color, all mid-gamut so tiny estimate errors never clip
PALETTE: Dict[str, Tuple[float, float, float]] = {
    "background": (0.84, 0.86, 0.88),
    "skin": (0.80, 0.62, 0.52),
    "brow": (0.34, 0.24, 0.18),
    "eye": (0.14, 0.14, 0.18),
    "lip": (0.64, 0.32, 0.34),
    "hair": (0.24, 0.16, 0.12),
}

#: canonical label id written by the fixture segmenter for each region
REGION_TO_LABEL: Dict[str, int] = {
    "background": 0,
    "skin": 1,
    "brow": 2,
    "eye": 4,
    "lip": 12,
    "hair": 17,
}


def _ellipse(h: int, w: int, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w]
    return ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0


def synthetic_face(
    height: int = 64,
    width: int = 64,
    texture: float = 0.0,
    seed: int = 0,
) -> Tuple[np.ndarray, LabelMap]:
    """Render a stylized face and its ground-truth label map.

    texture > 0 adds a small seeded per-pixel jitter (binary masks and region
    identities unchanged) so region deviations are nonzero where a test needs
    a spread-out distribution.
    """
    if height % 2 or width % 2 or height < 32 or width < 32:
        raise ParameterError(f"fixture size must be even and >= 32, got {(height, width)}")
    h2, w2 = height // 2, width // 2
    labels = np.zeros((h2, w2), dtype=np.int32)

    labels[0 : max(2, h2 // 7), :] = 17
    face = _ellipse(h2, w2, h2 * 0.56, w2 * 0.50, h2 * 0.40, w2 * 0.34)
    labels[face] = 1

    eye_row = int(h2 * 0.44)
    for cx_frac, eye_label, brow_label in ((0.36, 4, 2), (0.64, 5, 3)):
        cx = int(w2 * cx_frac)
        labels[eye_row : eye_row + 2, cx - 3 : cx + 3] = eye_label
        labels[eye_row - 4 : eye_row - 3, cx - 3 : cx + 3] = brow_label

    lip_row = int(h2 * 0.74)
    lip_cx = w2 // 2
    labels[lip_row : lip_row + 2, lip_cx - 4 : lip_cx + 4] = 12
    labels[lip_row + 2 : lip_row + 3, lip_cx - 4 : lip_cx + 4] = 13

    grid = np.repeat(np.repeat(labels, 2, axis=0), 2, axis=1)
    labelmap = LabelMap(grid=grid)

    image = np.empty((height, width, 3), dtype=np.float64)
    for label in np.unique(grid):
        color = PALETTE[labelmap.region_of(label)]
        image[grid == label] = color
    if texture > 0:
        rng = np.random.default_rng(seed)
        image = np.clip(image + rng.uniform(-texture, texture, image.shape), 0.02, 0.98)
    return image, labelmap


def fixture_segmenter(image: np.ndarray, texture_tolerance: float = 0.12) -> LabelMap:
    """Classify each pixel to the nearest palette color.

    Only meaningful for images rendered from PALETTE; pixels farther than
    texture_tolerance from every palette color are an error rather than a
    silent mislabel.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ParameterError(f"image must be H x W x 3, got shape {img.shape}")
    names = list(PALETTE)
    colors = np.array([PALETTE[n] for n in names])
    dist = np.linalg.norm(img[:, :, None, :] - colors[None, None, :, :], axis=-1)
    nearest = np.argmin(dist, axis=-1)
    if float(np.min(dist, axis=-1).max()) > texture_tolerance * np.sqrt(3):
        raise ParameterError("image colors do not match the fixture palette")
    label_for = np.array([REGION_TO_LABEL[n] for n in names], dtype=np.int32)
    return LabelMap(grid=label_for[nearest])
