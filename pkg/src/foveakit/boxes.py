"""Bounding boxes under the foveation transform.

A box lives in Euclidean normalized coordinates as (center, width, height).
Its projected form keeps the transformed center plus the norms of the two
tangent vectors J(c) @ (w, 0) and J(c) @ (0, h); because the Jacobian acts
linearly, those two magnitudes are recovered exactly by dividing out the
unit-axis image norms at the recovered center, so the round trip is exact
up to the inverse solve tolerance.

Also provides the box losses (L1, IoU, gIoU) and the ground-truth noising
utility used by denoising-style training schemes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, ShapeError
from .geometry import (
    FoveationParams,
    forward_map_batch,
    inverse_batch,
    jacobian_batch,
)

__all__ = [
    "EuclideanBox",
    "RiemannianBox",
    "LabeledBox",
    "to_riemannian",
    "to_euclidean",
    "boxes_to_riemannian",
    "boxes_to_euclidean",
    "area_amplification",
    "iou",
    "giou",
    "l1_loss",
    "noise_box",
]


@dataclass(frozen=True)
class EuclideanBox:
    """Axis-aligned box: center (cx, cy), full width w, full height h."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not all(np.isfinite(v) for v in (self.cx, self.cy, self.w, self.h)):
            raise ValueError(f"non-finite box field in {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be > 0, got w={self.w} h={self.h}")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max)."""
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)


@dataclass(frozen=True)
class RiemannianBox:
    """Projected box: transformed center plus tangent-vector magnitudes."""

    cx: float
    cy: float
    tx_mag: float
    ty_mag: float

    def __post_init__(self) -> None:
        if self.tx_mag <= 0 or self.ty_mag <= 0:
            raise ValueError(
                f"tangent magnitudes must be > 0, got {self.tx_mag}, {self.ty_mag}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.tx_mag, self.ty_mag],
                        dtype=np.float64)


@dataclass(frozen=True)
class LabeledBox:
    """Box with a category and a confidence (1.0 for ground truth)."""

    box: EuclideanBox
    class_id: int
    score: float = 1.0


def _as_boxes(arr, name: str = "boxes") -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.size == 0:
        return out.reshape(0, 4)
    if out.ndim == 1 and out.shape == (4,):
        out = out[None, :]
    if out.ndim != 2 or out.shape[1] != 4:
        raise ShapeError(f"{name} must have shape (N, 4), got {out.shape}")
    return out


def _axis_gains(centers: np.ndarray, params: FoveationParams,
                ) -> tuple[np.ndarray, np.ndarray]:
    """Norms of the Jacobian columns at each center: the factors by which
    unit x/y extents stretch."""
    J = jacobian_batch(centers, params)
    gx = np.hypot(J[:, 0, 0], J[:, 1, 0])
    gy = np.hypot(J[:, 0, 1], J[:, 1, 1])
    return gx, gy


def boxes_to_riemannian(boxes, params: FoveationParams) -> np.ndarray:
    """Project (N, 4) [cx, cy, w, h] boxes into the transformed space.

    Returns (N, 4) [phi_x(c), phi_y(c), ||t_x||, ||t_y||].
    """
    arr = _as_boxes(boxes)
    if arr.shape[0] == 0:
        return arr.copy()
    centers = forward_map_batch(arr[:, :2], params)
    gx, gy = _axis_gains(arr[:, :2], params)
    return np.column_stack([centers[:, 0], centers[:, 1],
                            gx * arr[:, 2], gy * arr[:, 3]])


def boxes_to_euclidean(boxes, params: FoveationParams, *,
                       tol: float = 1e-8, max_iter: int = 25,
                       method: str = "newton"):
    """Recover (N, 4) Euclidean boxes from their projected form.

    Returns ``(boxes, iterations, converged)``; the magnitudes invert
    exactly because the tangent map is linear in the extents.
    """
    arr = _as_boxes(boxes)
    if arr.shape[0] == 0:
        return arr.copy(), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool)
    inv = inverse_batch(arr[:, :2], params, method=method, tol=tol,
                        max_iter=max_iter)
    gx, gy = _axis_gains(inv.solutions, params)
    out = np.column_stack([inv.solutions[:, 0], inv.solutions[:, 1],
                           arr[:, 2] / gx, arr[:, 3] / gy])
    return out, inv.iterations, inv.converged


def to_riemannian(box: EuclideanBox, params: FoveationParams) -> RiemannianBox:
    row = boxes_to_riemannian(box.as_array(), params)[0]
    return RiemannianBox(cx=float(row[0]), cy=float(row[1]),
                         tx_mag=float(row[2]), ty_mag=float(row[3]))


def to_euclidean(box: RiemannianBox, params: FoveationParams,
                 tol: float = 1e-8) -> EuclideanBox:
    rows, _, converged = boxes_to_euclidean(box.as_array(), params, tol=tol)
    if not converged[0]:
        raise ConvergenceError(
            f"center inversion did not reach tol={tol} for {box}", (0,))
    row = rows[0]
    return EuclideanBox(cx=float(row[0]), cy=float(row[1]),
                        w=float(row[2]), h=float(row[3]))


def area_amplification(boxes, params: FoveationParams) -> np.ndarray:
    """Per-box transformed-over-original area ratio, shape (N,)."""
    arr = _as_boxes(boxes)
    if arr.shape[0] == 0:
        return np.zeros(0)
    projected = boxes_to_riemannian(arr, params)
    return (projected[:, 2] * projected[:, 3]) / (arr[:, 2] * arr[:, 3])


# ---------------------------------------------------------------------------
# Losses


def _corner_intersection(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(a: EuclideanBox, b: EuclideanBox) -> float:
    """Intersection over union of two boxes."""
    inter = _corner_intersection(a.corners, b.corners)
    union = a.area + b.area - inter
    return inter / union


def giou(a: EuclideanBox, b: EuclideanBox) -> float:
    """Generalized IoU: IoU minus the empty fraction of the enclosing box.

    Lies in (-1, 1]; unlike plain IoU it keeps varying (and therefore keeps
    a finite-difference gradient) when the boxes do not overlap.
    """
    ac, bc = a.corners, b.corners
    inter = _corner_intersection(ac, bc)
    union = a.area + b.area - inter
    hull_w = max(ac[2], bc[2]) - min(ac[0], bc[0])
    hull_h = max(ac[3], bc[3]) - min(ac[1], bc[1])
    hull = hull_w * hull_h
    return inter / union - (hull - union) / hull


def l1_loss(a: EuclideanBox, b: EuclideanBox) -> float:
    """Sum of absolute differences over (cx, cy, w, h)."""
    return float(np.abs(a.as_array() - b.as_array()).sum())


# ---------------------------------------------------------------------------
# Ground-truth noising


def noise_box(box: EuclideanBox, center_scale: float, size_scale: float,
              rng: int | np.random.Generator) -> EuclideanBox:
    """Jitter a box for denoising-style training.

    The center shifts uniformly within +-center_scale * (w, h) / 2 and the
    extents scale by independent uniform factors in
    [1 - size_scale, 1 + size_scale] (clamped positive).  Deterministic for
    a given seed; draw order is (dx, dy, fw, fh).
    """
    if center_scale < 0 or size_scale < 0:
        raise ValueError("noise scales must be >= 0")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dx = gen.uniform(-1.0, 1.0) * center_scale * box.w / 2.0
    dy = gen.uniform(-1.0, 1.0) * center_scale * box.h / 2.0
    fw = max(1.0 + gen.uniform(-1.0, 1.0) * size_scale, 1e-9)
    fh = max(1.0 + gen.uniform(-1.0, 1.0) * size_scale, 1e-9)
    return replace(box, cx=box.cx + dx, cy=box.cy + dy,
                   w=box.w * fw, h=box.h * fh)
