"""Figure rendering for the CLI report paths.

Each writer produces a single PNG next to the delimited output so a run
leaves both machine-readable and eyeball-readable artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import BIN_LABELS, EvalReport
from .search import SearchResult

__all__ = ["save_eval_figure", "save_search_figure", "save_bench_figure"]

_BIN_TICKS = ["0-50 m", "50-150 m", "150-250 m", "250+ m"]


def save_eval_figure(report: EvalReport, path) -> None:
    """Bar charts: mAP by distance bin and per class."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    ax1.bar(range(len(BIN_LABELS)), report.bin_maps, color="#348ABD")
    ax1.axhline(report.coco_map, color="#A60628", ls="--", lw=1,
                label=f"overall mAP = {report.coco_map:.3f}")
    ax1.set_xticks(range(len(BIN_LABELS)), _BIN_TICKS)
    ax1.set_ylim(0, 1.05)
    ax1.set_ylabel("mAP")
    ax1.set_title("mAP by distance bin")
    ax1.legend(loc="upper right", fontsize=8)

    names = [n for n, v in report.per_class.items() if v is not None]
    values = [v for v in report.per_class.values() if v is not None]
    ax2.bar(range(len(names)), values, color="#7A68A6")
    ax2.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax2.set_ylim(0, 1.05)
    ax2.set_title("per-class mAP")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_search_figure(result: SearchResult, path) -> None:
    """Objective heat map over (alpha, blend exponent), best cell marked.

    When the grid also spans origins or radii, each (alpha, p) cell shows
    the best objective across them.
    """
    alphas = sorted({row.params.alpha for row in result.table})
    ps = sorted({row.params.blend_exp for row in result.table})
    grid = np.full((len(ps), len(alphas)), -np.inf)
    for row in result.table:
        i = ps.index(row.params.blend_exp)
        j = alphas.index(row.params.alpha)
        grid[i, j] = max(grid[i, j], row.objective)

    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(alphas)), [f"{a:g}" for a in alphas], rotation=45)
    ax.set_yticks(range(len(ps)), [f"{p:g}" for p in ps])
    ax.set_xlabel("alpha")
    ax.set_ylabel("blend exponent")
    ax.set_title("mean box-area amplification")
    bi = ps.index(result.best.blend_exp)
    bj = alphas.index(result.best.alpha)
    ax.plot(bj, bi, "r*", markersize=14,
            label=f"best ({result.best.alpha:g}, {result.best.blend_exp:g})")
    ax.legend(loc="lower right", fontsize=8)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(rows: list[dict], path) -> None:
    """Timing bars with error whiskers, one bar per benchmarked stage."""
    labels = [r["stage"] for r in rows]
    means = [r["mean_ms"] for r in rows]
    stds = [r["std_ms"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(rows)), means, yerr=stds, capsize=4, color="#467821")
    ax.set_xticks(range(len(rows)), labels, rotation=15, ha="right")
    ax.set_ylabel("ms per run")
    ax.set_title("transform benchmark")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
