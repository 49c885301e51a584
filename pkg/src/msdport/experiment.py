"""Rolling-window study: solve M1/M2 per window and aggregate the metrics.

Every (window, criterion, reference-mode) cell is built, solved, and the
returned solution replayed through the exact dominance checkers. Excess
return is in-sample: the optimal portfolio's expected return minus the
benchmark's over the same estimation window, in percent per month.
Non-optimal cells stay in the result list and the manifest; they are
excluded from aggregates but never silently dropped.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from pathlib import Path

from .core import SupportBounds, expected_return
from .data import EstimationWindow, augment_reference_state, reference_point
from .dominance import DominanceSpec
from .milp.model import build_m1, build_m2
from .milp.solvers import (
    CommandLineAdapter,
    ScipyMilpAdapter,
    SolveLimits,
    certify,
    solve,
)

CRITERIA = ("msd", "mwsd")


@dataclass(frozen=True)
class StudyConfig:
    """Study parameters; recorded verbatim in the output manifest."""

    criteria: tuple[str, ...] = ("msd", "mwsd")
    references: tuple[str, ...] = ("rf", "median")
    d_minus: float = 0.18
    d_plus: float = 0.18
    time_limit: float = 600.0
    gap: float = 1e-6
    w_eps: float = 1e-6
    certification_tol: float = 1e-6
    jobs: int = 1
    seed: int = 0
    solver: str = "scipy"
    solver_command: str | None = None
    big_m_scale: float = 1.0

    def make_adapter(self):
        if self.solver == "scipy":
            return ScipyMilpAdapter()
        if self.solver == "command":
            if not self.solver_command:
                raise ValueError("solver='command' requires solver_command")
            return CommandLineAdapter(self.solver_command)
        raise ValueError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True)
class WindowResult:
    """Outcome of one (window, criterion, reference) cell."""

    window_index: int
    start: int
    end: int
    criterion: str
    reference_mode: str
    reference_value: float
    status: str
    objective: float | None
    benchmark_mean: float
    excess: float | None
    weights: np.ndarray | None
    n_active: int | None
    wall_time: float
    gap: float | None
    certified: bool | None
    certification_violations: int

    @property
    def cell(self) -> tuple[str, str]:
        return (self.criterion, self.reference_mode)


@dataclass(frozen=True)
class CellSummary:
    """Aggregates over the optimal windows of one (criterion, reference) cell."""

    criterion: str
    reference_mode: str
    optimal_count: int
    total_count: int
    popularity: np.ndarray  # percent of optimal windows holding each asset
    weight_min: np.ndarray
    weight_max: np.ndarray
    weight_mean: np.ndarray
    excess_by_window: tuple[tuple[int, float], ...]
    n_active_by_window: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class StudySummary:
    asset_labels: tuple[str, ...]
    cells: dict[tuple[str, str], CellSummary]
    config: StudyConfig
    rejected_cells: tuple[dict, ...] = ()


def run_cell(
    window: EstimationWindow,
    window_index: int,
    criterion: str,
    mode: str,
    config: StudyConfig,
) -> WindowResult:
    """Build, solve, and certify one cell."""
    r = reference_point(window, mode)
    win = augment_reference_state(window, r)
    bounds = SupportBounds.covering(win.panel.returns, win.benchmark.returns, [r])
    if criterion == "msd":
        model = build_m1(win.panel, win.benchmark, r, bounds,
                         big_m_scale=config.big_m_scale)
    elif criterion == "mwsd":
        model = build_m2(win.panel, win.benchmark, r, config.d_minus, config.d_plus,
                         bounds, big_m_scale=config.big_m_scale)
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    adapter = config.make_adapter()
    outcome = solve(model, adapter, SolveLimits(config.time_limit, config.gap),
                    seed=config.seed)
    bench_mean = expected_return(win.benchmark)

    if outcome.status != "optimal":
        return WindowResult(
            window_index, window.start, window.end, criterion, mode, r,
            outcome.status, outcome.objective, bench_mean, None, None, None,
            outcome.wall_time, outcome.gap, None, 0,
        )
    spec = DominanceSpec(criterion=criterion, reference=r, d_minus=config.d_minus,
                         d_plus=config.d_plus, tolerance=config.certification_tol)
    verdict = certify(outcome, win.panel, win.benchmark, spec, bounds)
    excess = float(outcome.objective - bench_mean)
    n_active = int(np.sum(outcome.weights > config.w_eps))
    return WindowResult(
        window_index, window.start, window.end, criterion, mode, r,
        "optimal", outcome.objective, bench_mean, excess, outcome.weights,
        n_active, outcome.wall_time, outcome.gap, verdict.holds,
        len(verdict.violations),
    )


def _run_cell_job(args):
    window, window_index, criterion, mode, config = args
    try:
        return run_cell(window, window_index, criterion, mode, config)
    except Exception as exc:  # recorded, never aborts the sweep
        r = float("nan")
        try:
            r = reference_point(window, mode)
        except Exception:
            pass
        return WindowResult(
            window_index, window.start, window.end, criterion, mode, r,
            "error", None, expected_return(window.benchmark), None, None, None,
            0.0, None, None, 0,
        )


def run_study(
    windows: list[EstimationWindow], config: StudyConfig | None = None
) -> tuple[list[WindowResult], StudySummary]:
    """Solve every window x criterion x reference cell and aggregate."""
    if config is None:
        config = StudyConfig()
    if not windows:
        raise ValueError("no estimation windows supplied")
    labels = windows[0].panel.asset_labels
    jobs = [
        (win, i, criterion, mode, config)
        for i, win in enumerate(windows)
        for criterion in config.criteria
        for mode in config.references
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_cell_job, jobs))
    else:
        results = [_run_cell_job(job) for job in jobs]
    results.sort(key=lambda res: (res.window_index, res.criterion, res.reference_mode))
    summary = summarize(results, labels, config)
    return results, summary


def summarize(
    results: list[WindowResult], asset_labels: tuple[str, ...], config: StudyConfig
) -> StudySummary:
    m = len(asset_labels)
    cells: dict[tuple[str, str], CellSummary] = {}
    rejected = tuple(
        {
            "window_index": r.window_index,
            "start": r.start,
            "end": r.end,
            "criterion": r.criterion,
            "reference": r.reference_mode,
            "status": r.status,
        }
        for r in results
        if r.status != "optimal"
    )
    for criterion in config.criteria:
        for mode in config.references:
            cell = [r for r in results if r.cell == (criterion, mode)]
            optimal = [r for r in cell if r.status == "optimal"]
            if optimal:
                weights = np.vstack([r.weights for r in optimal])
                active = weights > config.w_eps
                popularity = 100.0 * active.sum(axis=0) / len(optimal)
                w_min, w_max = weights.min(axis=0), weights.max(axis=0)
                w_mean = weights.mean(axis=0)
            else:
                popularity = np.zeros(m)
                w_min = np.zeros(m)
                w_max = np.zeros(m)
                w_mean = np.zeros(m)
            cells[(criterion, mode)] = CellSummary(
                criterion=criterion,
                reference_mode=mode,
                optimal_count=len(optimal),
                total_count=len(cell),
                popularity=popularity,
                weight_min=w_min,
                weight_max=w_max,
                weight_mean=w_mean,
                excess_by_window=tuple((r.window_index, r.excess) for r in optimal),
                n_active_by_window=tuple((r.window_index, r.n_active) for r in optimal),
            )
    return StudySummary(asset_labels, cells, config, rejected)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_outputs(
    results: list[WindowResult], summary: StudySummary, out_dir
) -> list[Path]:
    """Write the study CSVs and the JSON manifest; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = summary.asset_labels
    written = []

    written.append(_write_csv(
        out / "excess_by_window.csv",
        ["window_index", "start", "end", "criterion", "reference", "status",
         "objective", "benchmark_mean", "excess", "excess_oos"],
        [[r.window_index, r.start, r.end, r.criterion, r.reference_mode, r.status,
          r.objective, r.benchmark_mean, r.excess, None] for r in results],
    ))

    written.append(_write_csv(
        out / "n_active_by_window.csv",
        ["window_index", "start", "end", "criterion", "reference", "status", "n_active"],
        [[r.window_index, r.start, r.end, r.criterion, r.reference_mode, r.status,
          r.n_active] for r in results],
    ))

    pop_header = ["industry"]
    cell_keys = sorted(summary.cells)
    for criterion, mode in cell_keys:
        pop_header.append(f"popularity_{criterion}_{mode}")
    pop_rows = []
    for j, label in enumerate(labels):
        row = [label]
        for key in cell_keys:
            row.append(summary.cells[key].popularity[j])
        pop_rows.append(row)
    written.append(_write_csv(out / "popularity.csv", pop_header, pop_rows))

    range_rows = []
    for criterion, mode in cell_keys:
        cs = summary.cells[(criterion, mode)]
        for j, label in enumerate(labels):
            range_rows.append([label, criterion, mode, cs.weight_min[j],
                               cs.weight_max[j], cs.weight_mean[j]])
    written.append(_write_csv(
        out / "weight_ranges.csv",
        ["industry", "criterion", "reference", "weight_min", "weight_max", "weight_mean"],
        range_rows,
    ))

    heat_rows = []
    for r in results:
        if r.status != "optimal":
            continue
        for j, label in enumerate(labels):
            heat_rows.append([r.window_index, r.start, r.criterion, r.reference_mode,
                              label, float(r.weights[j])])
    written.append(_write_csv(
        out / "weights_heatmap.csv",
        ["window_index", "start", "criterion", "reference", "industry", "weight"],
        heat_rows,
    ))

    import scipy

    manifest = {
        "schema": "msdport.study/1",
        "config": asdict(summary.config),
        "asset_labels": list(labels),
        "cells": {
            f"{criterion}_{mode}": {
                "optimal": summary.cells[(criterion, mode)].optimal_count,
                "total": summary.cells[(criterion, mode)].total_count,
            }
            for criterion, mode in cell_keys
        },
        "non_optimal_cells": list(summary.rejected_cells),
        "solver_versions": {"scipy": scipy.__version__},
        "tolerances": {
            "w_eps": summary.config.w_eps,
            "certification": summary.config.certification_tol,
            "mip_gap": summary.config.gap,
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    manifest_path = out / "study_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(manifest_path)
    return written
