"""PNG raster IO for images, label maps, and debug masks."""

from __future__ import annotations

import io
from typing import Dict, Optional

import numpy as np
from PIL import Image

from .colors import as_image
from .errors import ParameterError
from .regions import LabelMap, SoftMask


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def image_to_png_bytes(image: np.ndarray) -> bytes:
    img = as_image(image)
    arr = np.round(img * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except Exception as e:
        raise ParameterError(f"not a decodable image: {e}") from e


def save_image(path, image: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(image_to_png_bytes(image))


def load_labelmap(path, mapping: Optional[Dict[int, str]] = None) -> LabelMap:
    """Read a single-channel 8-bit raster of label ids."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "P", "I", "I;16"):
                im = im.convert("L")
            arr = np.asarray(im)
    except ParameterError:
        raise
    except Exception as e:
        raise ParameterError(f"not a decodable label raster: {e}") from e
    if arr.ndim != 2:
        raise ParameterError(f"label raster must be single-channel, got shape {arr.shape}")
    grid = arr.astype(np.int32)
    return LabelMap(grid=grid, mapping=mapping) if mapping else LabelMap(grid=grid)


def labelmap_bytes_to_labelmap(data: bytes, mapping: Optional[Dict[int, str]] = None) -> LabelMap:
    return load_labelmap(io.BytesIO(data), mapping)


def save_mask(path, mask: SoftMask) -> None:
    arr = np.round(mask.grid * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")
