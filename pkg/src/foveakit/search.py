"""Offline grid search for transform parameters.

Scores a candidate parameter set by how much it magnifies a collection of
annotated boxes (mean transformed-over-original area ratio) and scans a
Cartesian grid of (alpha, blend_exp, origin, radius) candidates.  Ties are
broken toward the mildest warp: smallest alpha, then smallest blend
exponent, then lexicographic origin, then smallest radius.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .boxes import area_amplification
from .errors import EmptyInputError
from .evaluate import assign_bin
from .geometry import FoveationParams

__all__ = [
    "SearchSpec",
    "SearchRow",
    "SearchResult",
    "DEFAULT_GRID",
    "objective",
    "weighted_objective",
    "grid_search",
    "write_table_csv",
]

# Brackets the empirically good operating point (2.0, 2.0) with margin.
DEFAULT_GRID = tuple(0.5 + 0.25 * k for k in range(15))

OBJECTIVE_KINDS = ("amplification", "mean_area", "total_area")


@dataclass(frozen=True)
class SearchSpec:
    """Grids to scan; origins and radii default to a single fixed value."""

    alpha_grid: tuple[float, ...] = DEFAULT_GRID
    p_grid: tuple[float, ...] = DEFAULT_GRID
    origin_grid: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    r_grid: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        for name, grid in (("alpha_grid", self.alpha_grid),
                           ("p_grid", self.p_grid),
                           ("r_grid", self.r_grid)):
            if len(grid) == 0:
                raise EmptyInputError(f"{name} is empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly ascending: {grid}")
        if len(self.origin_grid) == 0:
            raise EmptyInputError("origin_grid is empty")
        # Validate every vertex eagerly so failures name the bad value
        # instead of surfacing mid-scan.
        for a in self.alpha_grid:
            for p in self.p_grid:
                for ox, oy in self.origin_grid:
                    for r in self.r_grid:
                        FoveationParams(ox=ox, oy=oy, radius=r, alpha=a,
                                        blend_exp=p)

    def vertices(self) -> list[FoveationParams]:
        """All candidates in grid order (alpha-major nesting)."""
        return [FoveationParams(ox=ox, oy=oy, radius=r, alpha=a, blend_exp=p)
                for a in self.alpha_grid
                for p in self.p_grid
                for ox, oy in self.origin_grid
                for r in self.r_grid]


@dataclass(frozen=True)
class SearchRow:
    params: FoveationParams
    objective: float


@dataclass(frozen=True)
class SearchResult:
    best: FoveationParams
    objective: float
    table: tuple[SearchRow, ...]


def _boxes_array(boxes) -> np.ndarray:
    arr = np.asarray([b.as_array() if hasattr(b, "as_array") else b
                      for b in boxes], dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("objective needs at least one box")
    return arr.reshape(-1, 4)


def objective(boxes, params: FoveationParams, *,
              kind: str = "amplification") -> float:
    """Score of one candidate over a box collection.

    ``amplification`` (the default) is the mean per-box area ratio, which
    compares fairly across mixed box sizes; ``mean_area`` and
    ``total_area`` score the absolute transformed areas instead.
    """
    arr = _boxes_array(boxes)
    if kind == "amplification":
        return float(np.mean(area_amplification(arr, params)))
    transformed = area_amplification(arr, params) * arr[:, 2] * arr[:, 3]
    if kind == "mean_area":
        return float(np.mean(transformed))
    if kind == "total_area":
        return float(np.sum(transformed))
    raise ValueError(f"unknown objective kind {kind!r}")


def weighted_objective(boxes, distances, params: FoveationParams,
                       bin_weights) -> float:
    """Distance-weighted mean amplification.

    Each box contributes with the weight of its distance bin; boxes whose
    bins all carry zero weight leave nothing to average, which is an error.
    """
    arr = _boxes_array(boxes)
    dist = np.asarray(distances, dtype=np.float64)
    if dist.shape != (arr.shape[0],):
        raise ValueError(
            f"need one distance per box, got {dist.shape} for {arr.shape[0]} boxes")
    weights = np.asarray(bin_weights, dtype=np.float64)
    if weights.shape != (4,):
        raise ValueError(f"bin_weights must have length 4, got {weights.shape}")
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("bin weights must be >= 0 and not all zero")
    per_box = weights[[assign_bin(d) for d in dist]]
    total = per_box.sum()
    if total == 0.0:
        raise EmptyInputError(
            "empty effective set: no box falls in a positively weighted bin")
    amp = area_amplification(arr, params)
    return float(np.sum(per_box * amp) / total)


def _tie_break_key(row: SearchRow) -> tuple:
    p = row.params
    return (p.alpha, p.blend_exp, p.ox, p.oy, p.radius)


def grid_search(boxes, spec: SearchSpec, *, kind: str = "amplification",
                workers: int = 1, score_fn=None) -> SearchResult:
    """Evaluate every grid vertex and return the argmax plus full table.

    The table is assembled in grid order regardless of worker scheduling,
    and the winner is selected by (objective, tie-break key), so the result
    never depends on enumeration order.  ``score_fn(boxes, params)``
    overrides the built-in objective when given.
    """
    arr = _boxes_array(boxes)
    candidates = spec.vertices()
    score = score_fn or (lambda b, prm: objective(b, prm, kind=kind))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(lambda prm: score(arr, prm), candidates))
    else:
        scores = [score(arr, prm) for prm in candidates]
    table = tuple(SearchRow(params=prm, objective=sc)
                  for prm, sc in zip(candidates, scores))
    best = min(table, key=lambda row: (-row.objective,) + _tie_break_key(row))
    return SearchResult(best=best.params, objective=best.objective,
                        table=table)


def write_table_csv(result: SearchResult, path) -> None:
    """Emit the full search table as (alpha, p, ox, oy, R, objective)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "p", "ox", "oy", "R", "objective"])
        for row in result.table:
            prm = row.params
            writer.writerow([repr(prm.alpha), repr(prm.blend_exp),
                             repr(prm.ox), repr(prm.oy), repr(prm.radius),
                             repr(row.objective)])
