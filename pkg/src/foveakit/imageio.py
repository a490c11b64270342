"""Image file IO at the CLI boundary: 8-bit PNG, binary PPM/PGM."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeError
from .warp import ImageBuffer

__all__ = ["read_image", "write_image"]

_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM"}


def read_image(path) -> ImageBuffer:
    """Load a PNG/PPM/PGM file into a float buffer in [0, 1]."""
    with Image.open(path) as img:
        if img.mode in ("L", "I;16"):
            img = img.convert("L")
        elif img.mode != "RGB":
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    return ImageBuffer(arr)


def write_image(buf: ImageBuffer, path) -> None:
    """Write a float buffer as an 8-bit image; format from the suffix."""
    suffix = Path(path).suffix.lower()
    if suffix not in _FORMATS:
        raise ShapeError(f"unsupported image suffix {suffix!r} for {path}")
    if suffix == ".pgm" and buf.channels != 1:
        raise ShapeError("PGM output requires a single-channel image")
    data = np.clip(np.rint(buf.data * 255.0), 0, 255).astype(np.uint8)
    if buf.channels == 1:
        img = Image.fromarray(data[:, :, 0], mode="L")
    else:
        img = Image.fromarray(data, mode="RGB")
    img.save(path, format=_FORMATS[suffix])
