"""Render study figures to image files alongside the CSV outputs.

Figures mirror the CSV content: excess returns per window, diversification
counts, industry popularity, weight ranges, and per-cell weight heatmaps.
Rendering is optional reporting on top of the CSVs; nothing downstream
depends on it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiment import StudySummary, WindowResult

_CELL_STYLE = {
    ("msd", "rf"): dict(color="tab:blue", marker="o"),
    ("msd", "median"): dict(color="tab:green", marker="o"),
    ("mwsd", "rf"): dict(color="tab:orange", marker="s"),
    ("mwsd", "median"): dict(color="tab:red", marker="s"),
}


def _style(cell):
    return _CELL_STYLE.get(cell, dict(color="tab:gray", marker="x"))


def _window_year(results, index):
    for r in results:
        if r.window_index == index:
            return r.start // 100
    return index


def render_figures(
    results: list[WindowResult], summary: StudySummary, out_dir
) -> list[Path]:
    """Write PNG figures for the study; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    modes = sorted({mode for _, mode in summary.cells})
    labels = summary.asset_labels
    m = len(labels)

    # Excess return per window, one panel per reference mode.
    fig, axes = plt.subplots(1, max(len(modes), 1), figsize=(6 * max(len(modes), 1), 4),
                             squeeze=False)
    for ax, mode in zip(axes[0], modes):
        for (criterion, cell_mode), cs in sorted(summary.cells.items()):
            if cell_mode != mode or not cs.excess_by_window:
                continue
            xs = [_window_year(results, i) for i, _ in cs.excess_by_window]
            ys = [e for _, e in cs.excess_by_window]
            ax.plot(xs, ys, label=criterion.upper(), markersize=3, **_style((criterion, mode)))
        ax.set_title(f"reference = {mode}")
        ax.set_xlabel("window start year")
        ax.set_ylabel("excess return (%/month)")
        ax.legend()
        ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out / "fig_excess_by_window.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    # Diversification: number of active industries per window.
    fig, axes = plt.subplots(1, max(len(modes), 1), figsize=(6 * max(len(modes), 1), 4),
                             squeeze=False)
    for ax, mode in zip(axes[0], modes):
        for (criterion, cell_mode), cs in sorted(summary.cells.items()):
            if cell_mode != mode or not cs.n_active_by_window:
                continue
            xs = [_window_year(results, i) for i, _ in cs.n_active_by_window]
            ys = [k for _, k in cs.n_active_by_window]
            ax.plot(xs, ys, label=criterion.upper(), markersize=3, **_style((criterion, mode)))
        ax.set_title(f"reference = {mode}")
        ax.set_xlabel("window start year")
        ax.set_ylabel("industries held")
        ax.legend()
        ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out / "fig_n_active_by_window.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    # Popularity of each industry per cell.
    fig, ax = plt.subplots(figsize=(max(8, 0.25 * m), 4.5))
    idx = np.arange(m)
    n_cells = max(len(summary.cells), 1)
    width = 0.8 / n_cells
    for k, ((criterion, mode), cs) in enumerate(sorted(summary.cells.items())):
        ax.bar(idx + k * width, cs.popularity, width,
               label=f"{criterion.upper()} ({mode})", color=_style((criterion, mode))["color"])
    ax.set_xticks(idx + 0.4 - width / 2)
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_ylabel("popularity (% of optimal windows)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "fig_popularity.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    # Weight ranges: min-max bars with mean markers, one panel per cell.
    n_panels = max(len(summary.cells), 1)
    fig, axes = plt.subplots(n_panels, 1, figsize=(max(8, 0.25 * m), 3.2 * n_panels),
                             squeeze=False)
    for ax, ((criterion, mode), cs) in zip(axes[:, 0], sorted(summary.cells.items())):
        ax.vlines(idx, cs.weight_min, cs.weight_max, color="0.6", lw=3)
        ax.plot(idx, cs.weight_mean, "x", color="tab:red", markersize=4)
        ax.set_xticks(idx)
        ax.set_xticklabels(labels, rotation=90, fontsize=7)
        ax.set_ylabel("weight")
        ax.set_title(f"{criterion.upper()} ({mode}): min-max range and mean")
        ax.set_ylim(0, 1)
    fig.tight_layout()
    path = out / "fig_weight_ranges.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    # Weight heatmaps, one file per cell.
    for (criterion, mode), cs in sorted(summary.cells.items()):
        cell_results = [r for r in results
                        if r.cell == (criterion, mode) and r.status == "optimal"]
        if not cell_results:
            continue
        grid = np.vstack([r.weights for r in cell_results])
        fig, ax = plt.subplots(figsize=(max(8, 0.22 * m), max(3, 0.18 * len(cell_results))))
        im = ax.imshow(grid, aspect="auto", cmap="viridis", vmin=0, vmax=1)
        ax.set_yticks(range(len(cell_results)))
        ax.set_yticklabels([r.start // 100 for r in cell_results], fontsize=6)
        ax.set_xticks(idx)
        ax.set_xticklabels(labels, rotation=90, fontsize=6)
        ax.set_ylabel("window start year")
        fig.colorbar(im, ax=ax, label="weight")
        ax.set_title(f"weights: {criterion.upper()} ({mode})")
        fig.tight_layout()
        path = out / f"fig_weights_heatmap_{criterion}_{mode}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
