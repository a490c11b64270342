"""Dense image resampling under the foveation transform.

Rendering works gather-style: for every output pixel center the inverse
transform supplies the source location, and the source image is sampled
bilinearly there.  This gives one solve per output pixel and no holes.
The reverse direction (``unwarp_image``) needs no solver at all, since the
forward map itself provides the sampling grid.

Pixel (col i, row j) of a W x H image corresponds to normalized
coordinates (2 (i + 0.5) / W - 1, 2 (j + 0.5) / H - 1); the convention is
self-inverse and resolution independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeError
from .geometry import FoveationParams, forward_map_batch, inverse_batch

__all__ = [
    "ImageBuffer",
    "WarpGrid",
    "pixel_center_grid",
    "normalized_to_pixel",
    "build_inverse_grid",
    "cached_inverse_grid",
    "warp_image",
    "unwarp_image",
    "psnr",
]


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major float image with values in [0, 1], shape (H, W, C)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ShapeError(
                f"image must be (H, W) or (H, W, 1|3), got {np.shape(self.data)}")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class WarpGrid:
    """Per-output-pixel source coordinates (normalized) plus validity."""

    source: np.ndarray   # (H, W, 2) normalized source coordinates
    valid: np.ndarray    # (H, W) bool
    params: FoveationParams
    tol: float

    @property
    def height(self) -> int:
        return self.source.shape[0]

    @property
    def width(self) -> int:
        return self.source.shape[1]

    def failed_pixels(self) -> tuple[tuple[int, int], ...]:
        """(row, col) positions where the inverse solve did not converge."""
        return tuple((int(r), int(c)) for r, c in zip(*np.nonzero(~self.valid)))


def pixel_center_grid(width: int, height: int) -> np.ndarray:
    """Normalized coordinates of all pixel centers, shape (H, W, 2)."""
    xs = 2.0 * (np.arange(width, dtype=np.float64) + 0.5) / width - 1.0
    ys = 2.0 * (np.arange(height, dtype=np.float64) + 0.5) / height - 1.0
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def normalized_to_pixel(coords: np.ndarray, width: int, height: int,
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Map normalized coordinates back to fractional pixel positions."""
    px = (coords[..., 0] + 1.0) * width / 2.0 - 0.5
    py = (coords[..., 1] + 1.0) * height / 2.0 - 0.5
    return px, py


def build_inverse_grid(width: int, height: int, params: FoveationParams,
                       tol: float = 1e-8, max_iter: int = 30) -> WarpGrid:
    """Solve the inverse transform at every output pixel center.

    A pixel is marked invalid when the solver fails (not expected for
    invertible parameters) or when its source lands outside the frame by
    more than a one-pixel guard band.
    """
    if width < 1 or height < 1:
        raise ValueError(f"grid dims must be >= 1, got {width}x{height}")
    centers = pixel_center_grid(width, height)
    if params.is_identity:
        return WarpGrid(source=centers,
                        valid=np.ones((height, width), dtype=bool),
                        params=params, tol=tol)
    flat = centers.reshape(-1, 2)
    res = inverse_batch(flat, params, method="newton", tol=tol,
                        max_iter=max_iter)
    source = res.solutions.reshape(height, width, 2)
    guard_x = 2.0 / width
    guard_y = 2.0 / height
    in_frame = ((np.abs(source[..., 0]) <= 1.0 + guard_x)
                & (np.abs(source[..., 1]) <= 1.0 + guard_y))
    valid = res.converged.reshape(height, width) & in_frame
    # Identity-region pixels come back bit-exact: their first residual is
    # exactly zero, so the solver never moves them off their own center.
    return WarpGrid(source=source, valid=valid, params=params, tol=tol)


@lru_cache(maxsize=16)
def cached_inverse_grid(width: int, height: int, params: FoveationParams,
                        tol: float = 1e-8) -> WarpGrid:
    """Memoized grid construction keyed by (dims, params, tol)."""
    return build_inverse_grid(width, height, params, tol)


def _sample_bilinear(data: np.ndarray, px: np.ndarray, py: np.ndarray,
                     ) -> np.ndarray:
    """Clamp-to-edge bilinear sampling of (H, W, C) data at fractional
    pixel positions; output shape px.shape + (C,)."""
    h, w = data.shape[:2]
    x0f = np.floor(px)
    y0f = np.floor(py)
    fx = (px - x0f)[..., None]
    fy = (py - y0f)[..., None]
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    v00 = data[y0, x0]
    v01 = data[y0, x1]
    v10 = data[y1, x0]
    v11 = data[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bottom = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bottom * fy


def warp_image(src: ImageBuffer, grid: WarpGrid) -> ImageBuffer:
    """Resample the source through the grid; invalid pixels become 0."""
    px, py = normalized_to_pixel(grid.source, src.width, src.height)
    out = _sample_bilinear(src.data, px, py)
    out[~grid.valid] = 0.0
    return ImageBuffer(out)


def unwarp_image(foveated: ImageBuffer, params: FoveationParams,
                 ) -> ImageBuffer:
    """Invert :func:`warp_image` by sampling through the forward map."""
    centers = pixel_center_grid(foveated.width, foveated.height)
    coords = forward_map_batch(centers.reshape(-1, 2), params).reshape(
        centers.shape)
    px, py = normalized_to_pixel(coords, foveated.width, foveated.height)
    return ImageBuffer(_sample_bilinear(foveated.data, px, py))


def psnr(a: ImageBuffer, b: ImageBuffer, border: int = 0) -> float:
    """Peak signal-to-noise ratio in dB over the interior region."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    da, db = a.data, b.data
    if border:
        da = da[border:-border, border:-border]
        db = db[border:-border, border:-border]
    mse = float(np.mean((da - db) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)
