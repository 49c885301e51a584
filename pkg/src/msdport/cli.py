"""Command-line interface: dominance checks, optimization, and backtests.

Exit codes: 0 success (dominance holds / optimal solution / windows solved),
1 negative outcome (dominance fails / infeasible / no window solvable),
2 usage or data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    DiscreteReturnDistribution,
    SupportBounds,
    canonicalize,
    expected_return,
)
from .data import (
    DataError,
    EstimationWindow,
    ReturnSeries,
    align,
    augment_reference_state,
    load_panel_csv,
    market_from_factors,
    parse_ff49,
    parse_ff_factors,
    parse_series,
    reference_point,
    rolling_windows,
)
from .dominance import DominanceSpec, check
from .experiment import StudyConfig, emit_outputs, run_study
from .milp.io import export_lp, export_mps
from .milp.model import AssetPanel, build_m1, build_m2
from .milp.solvers import SolveLimits, certify, solve

SOLVER_ENV_VAR = "MSDPORT_SOLVER_CMD"

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_ERROR = 2


class CliError(Exception):
    """Usage or input error; maps to exit code 2."""


def _read_returns(path) -> np.ndarray:
    """Whitespace/newline-separated returns, '#' comments allowed."""
    tokens = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#")[0].replace(",", " ")
        tokens += line.split()
    if not tokens:
        raise CliError(f"{path}: no returns found")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise CliError(f"{path}: bad value ({exc})") from exc


def _read_benchmark_states(path, n_expected: int | None = None) -> np.ndarray:
    """Benchmark state returns: (YYYYMM, value) series or a plain float list."""
    first_tokens = None
    for raw in Path(path).read_text().splitlines():
        tokens = raw.replace(",", " ").split()
        if tokens:
            first_tokens = tokens
            break
    if first_tokens and len(first_tokens) >= 2 and first_tokens[0].isdigit() \
            and len(first_tokens[0]) == 6:
        series = parse_series(path)
        values = series.values
    else:
        values = _read_returns(path)
    if n_expected is not None and values.size != n_expected:
        raise CliError(
            f"{path}: benchmark has {values.size} states, panel has {n_expected}"
        )
    return values


def _spec_from_args(args) -> DominanceSpec:
    criterion = args.criterion
    d_given = args.d_minus is not None or args.d_plus is not None
    if d_given and criterion != "mwsd":
        raise CliError("--d-minus/--d-plus are only valid with --criterion mwsd")
    d_minus = args.d_minus if args.d_minus is not None else (0.18 if criterion == "mwsd" else 1.0)
    d_plus = args.d_plus if args.d_plus is not None else (0.18 if criterion == "mwsd" else 1.0)
    reference = args.reference if args.reference is not None else 0.0
    if criterion in ("msd", "mwsd") and args.reference is None:
        raise CliError(f"--reference is required for --criterion {criterion}")
    return DominanceSpec(
        criterion=criterion,
        reference=reference,
        d_minus=d_minus,
        d_plus=d_plus,
        tolerance=args.tolerance,
    )


def cmd_check(args) -> int:
    x = _read_returns(args.x_file)
    y = _read_returns(args.y_file)
    if x.size != y.size:
        raise CliError(f"grid mismatch: X has {x.size} states, Y has {y.size}")
    if args.probs:
        probs = _read_returns(args.probs)
    else:
        probs = np.full(x.size, 1.0 / x.size)
    spec = _spec_from_args(args)
    pair = canonicalize(x, y, probs)
    if spec.criterion in ("msd", "mwsd"):
        gap = float(np.min(np.abs(pair.y.returns - spec.reference)))
        if gap > 1e-9:
            # Zero-probability reference state keeps the checkers applicable.
            window = EstimationWindow(
                start=0, end=0,
                panel=AssetPanel(pair.x.returns.reshape(1, -1), ("x",), pair.probs),
                benchmark=pair.y, riskfree=np.array([]),
            )
            window = augment_reference_state(window, spec.reference)
            pair = canonicalize(window.panel.returns[0], window.benchmark.returns,
                                window.benchmark.probs)
    verdict = check(pair, spec)
    payload = {
        "schema": "msdport.check/1",
        "version": __version__,
        "reference": spec.reference,
        "d_minus": spec.d_minus,
        "d_plus": spec.d_plus,
        **verdict.as_dict(),
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"criterion : {spec.criterion}")
        print(f"holds     : {verdict.holds}")
        print(f"t_d bounds: [{verdict.t_d_minus:g}, {verdict.t_d_plus:g}]")
        for v in verdict.violations:
            print(f"  violated {v.condition} at state {v.state}: "
                  f"lhs={v.lhs:.6g} rhs={v.rhs:.6g}")
    return EXIT_OK if verdict.holds else EXIT_NEGATIVE


def _solver_limits(args) -> SolveLimits:
    return SolveLimits(time=args.time_limit, gap=args.gap)


def _make_adapter(args):
    from .milp.solvers import CommandLineAdapter, ScipyMilpAdapter

    if args.solver == "command":
        command = args.solver_command or os.environ.get(SOLVER_ENV_VAR)
        if not command:
            raise CliError(
                f"--solver command needs --solver-command or ${SOLVER_ENV_VAR}"
            )
        return CommandLineAdapter(command)
    return ScipyMilpAdapter()


def cmd_optimize(args) -> int:
    labels, matrix = load_panel_csv(args.panel)
    n = matrix.shape[1]
    y = _read_benchmark_states(args.benchmark, n)
    probs = _read_returns(args.probs) if args.probs else np.full(n, 1.0 / n)

    # Canonical state order, then reference resolution and augmentation.
    order = np.argsort(y, kind="stable")
    window = EstimationWindow(
        start=0, end=0,
        panel=AssetPanel(matrix[:, order], labels, probs[order]),
        benchmark=DiscreteReturnDistribution(y[order], probs[order]),
        riskfree=_read_returns(args.riskfree) if args.riskfree else np.array([]),
    )
    if args.reference is not None:
        r = args.reference
    elif args.reference_mode == "median":
        r = reference_point(window, "median")
    elif args.reference_mode == "rf":
        if window.riskfree.size == 0:
            raise CliError("--reference-mode rf needs --riskfree")
        r = reference_point(window, "rf")
    else:
        raise CliError("need --reference or --reference-mode")
    window = augment_reference_state(window, r)
    bounds = SupportBounds.covering(window.panel.returns, window.benchmark.returns, [r])

    d_minus = args.d_minus if args.d_minus is not None else 0.18
    d_plus = args.d_plus if args.d_plus is not None else 0.18
    if args.criterion == "mwsd":
        model = build_m2(window.panel, window.benchmark, r, d_minus, d_plus, bounds)
    else:
        if args.d_minus is not None or args.d_plus is not None:
            raise CliError("--d-minus/--d-plus are only valid with --criterion mwsd")
        model = build_m1(window.panel, window.benchmark, r, bounds)

    if args.export_lp:
        export_lp(model, args.export_lp)
        print(f"wrote {args.export_lp}")
    if args.export_mps:
        export_mps(model, args.export_mps)
        print(f"wrote {args.export_mps}")
    if args.export_only:
        if not (args.export_lp or args.export_mps):
            raise CliError("--export-only needs --export-lp and/or --export-mps")
        return EXIT_OK

    outcome = solve(model, _make_adapter(args), _solver_limits(args), seed=args.seed)
    payload = {
        "schema": "msdport.solution/1",
        "version": __version__,
        "status": outcome.status,
        "criterion": args.criterion,
        "reference": r,
        "d_minus": d_minus if args.criterion == "mwsd" else None,
        "d_plus": d_plus if args.criterion == "mwsd" else None,
        "n_states": window.benchmark.n_states,
        "n_assets": window.panel.n_assets,
        "augmented": window.augmented,
        "objective": outcome.objective,
        "benchmark_mean": expected_return(window.benchmark),
        "solver": {"wall_time": outcome.wall_time, "gap": outcome.gap,
                   "message": outcome.message},
    }
    if outcome.status == "optimal":
        spec = DominanceSpec(args.criterion, r, d_minus, d_plus, tolerance=1e-6)
        verdict = certify(outcome, window.panel, window.benchmark, spec, bounds)
        payload["weights"] = {
            label: float(w) for label, w in zip(labels, outcome.weights)
        }
        payload["excess"] = outcome.objective - payload["benchmark_mean"]
        payload["certified"] = verdict.holds
        payload["certification_violations"] = [v.as_dict() for v in verdict.violations]
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    if outcome.status == "optimal":
        return EXIT_OK if payload["certified"] else EXIT_ERROR
    if outcome.status == "infeasible":
        return EXIT_NEGATIVE
    return EXIT_ERROR


def cmd_backtest(args) -> int:
    industries = parse_ff49(args.industries)
    if args.factors:
        factors = parse_ff_factors(args.factors)
        benchmark = market_from_factors(factors)
        riskfree = factors.get("RF")
        if args.riskfree:
            riskfree = parse_series(args.riskfree, label="rf")
        if riskfree is None:
            raise CliError("factors file lacks RF; pass --riskfree")
    else:
        if not args.benchmark:
            raise CliError("need --benchmark or --factors")
        benchmark = parse_series(args.benchmark, label="benchmark")
        if args.riskfree:
            riskfree = parse_series(args.riskfree, label="rf")
        elif "rf" in args.references:
            raise CliError("--references including rf needs --riskfree (or --factors)")
        else:
            # Median-only study: a placeholder zero T-bill series keeps the
            # window builder's alignment contract satisfied.
            riskfree = ReturnSeries(benchmark.dates, np.zeros(len(benchmark)), "rf0")
    aligned = align(industries + [benchmark, riskfree])
    industries, benchmark, riskfree = aligned[:-2], aligned[-2], aligned[-1]
    if args.start:
        industries = [s.slice_range(args.start, 999912) for s in industries]
        benchmark = benchmark.slice_range(args.start, 999912)
        riskfree = riskfree.slice_range(args.start, 999912)
    if args.end:
        industries = [s.slice_range(0, args.end) for s in industries]
        benchmark = benchmark.slice_range(0, args.end)
        riskfree = riskfree.slice_range(0, args.end)

    windows, rejected = rolling_windows(industries, benchmark, riskfree,
                                        window=args.window, step=args.step)
    for item in rejected:
        print(f"skipping window {item['start']}-{item['end']}: gaps in "
              + ", ".join(item["gaps"]), file=sys.stderr)
    if args.max_windows:
        windows = windows[: args.max_windows]
    if not windows:
        print("no usable estimation windows", file=sys.stderr)
        return EXIT_NEGATIVE

    config = StudyConfig(
        criteria=tuple(args.criteria),
        references=tuple(args.references),
        d_minus=args.d_minus if args.d_minus is not None else 0.18,
        d_plus=args.d_plus if args.d_plus is not None else 0.18,
        time_limit=args.time_limit,
        gap=args.gap,
        jobs=args.jobs,
        seed=args.seed,
        solver="command" if args.solver == "command" else "scipy",
        solver_command=args.solver_command or os.environ.get(SOLVER_ENV_VAR),
    )
    results, summary = run_study(windows, config)
    out_dir = Path(args.out)
    written = emit_outputs(results, summary, out_dir)
    if args.figures:
        from .figures import render_figures

        written += render_figures(results, summary, out_dir)
    for path in written:
        print(f"wrote {path}")
    n_optimal = sum(1 for r in results if r.status == "optimal")
    n_uncertified = sum(1 for r in results if r.certified is False)
    print(f"{n_optimal}/{len(results)} cells optimal over {len(windows)} windows")
    if n_uncertified:
        print(f"WARNING: {n_uncertified} optimal cells failed certification",
              file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if n_optimal > 0 else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msdport",
        description="Markowitz stochastic dominance portfolio toolkit",
    )
    parser.add_argument("--version", action="version", version=f"msdport {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="decide dominance between two return files")
    p_check.add_argument("x_file", help="candidate returns (one value per line)")
    p_check.add_argument("y_file", help="benchmark returns (shared state grid)")
    p_check.add_argument("--probs", help="state probabilities file (default: uniform)")
    p_check.add_argument("--criterion", choices=("fsd", "msd", "mwsd"), default="msd")
    p_check.add_argument("--reference", type=float, help="reference return r")
    p_check.add_argument("--d-minus", type=float, dest="d_minus")
    p_check.add_argument("--d-plus", type=float, dest="d_plus")
    p_check.add_argument("--tolerance", type=float, default=1e-9)
    p_check.add_argument("--json", action="store_true", help="machine-readable verdict")
    p_check.set_defaults(func=cmd_check)

    p_opt = sub.add_parser("optimize", help="solve M1/M2 for a panel and benchmark")
    p_opt.add_argument("--panel", required=True, help="asset panel CSV (labels header)")
    p_opt.add_argument("--benchmark", required=True,
                       help="benchmark returns (series or plain list)")
    p_opt.add_argument("--probs", help="state probabilities file (default: uniform)")
    p_opt.add_argument("--criterion", choices=("msd", "mwsd"), default="msd")
    p_opt.add_argument("--reference", type=float, help="literal reference return")
    p_opt.add_argument("--reference-mode", choices=("rf", "median"), dest="reference_mode")
    p_opt.add_argument("--riskfree", help="T-bill file for --reference-mode rf")
    p_opt.add_argument("--d-minus", type=float, dest="d_minus")
    p_opt.add_argument("--d-plus", type=float, dest="d_plus")
    p_opt.add_argument("--solver", choices=("scipy", "command"), default="scipy")
    p_opt.add_argument("--solver-command", dest="solver_command",
                       help="command template with {mps} {sol} placeholders")
    p_opt.add_argument("--time-limit", type=float, default=600.0, dest="time_limit")
    p_opt.add_argument("--gap", type=float, default=1e-6)
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--export-lp", dest="export_lp", help="write model in LP format")
    p_opt.add_argument("--export-mps", dest="export_mps", help="write model in MPS format")
    p_opt.add_argument("--export-only", action="store_true", dest="export_only",
                       help="write model files and skip solving")
    p_opt.add_argument("--out", help="write the solution JSON to this file")
    p_opt.set_defaults(func=cmd_optimize)

    p_back = sub.add_parser("backtest", help="rolling-window industry study")
    p_back.add_argument("--industries", required=True, help="49-industry monthly file")
    p_back.add_argument("--benchmark", help="benchmark series (YYYYMM, value)")
    p_back.add_argument("--factors", help="factors file: benchmark = (Mkt-RF) + RF")
    p_back.add_argument("--riskfree", help="T-bill series (YYYYMM, value)")
    p_back.add_argument("--window", type=int, default=36)
    p_back.add_argument("--step", type=int, default=12)
    p_back.add_argument("--start", type=int, help="first month YYYYMM")
    p_back.add_argument("--end", type=int, help="last month YYYYMM")
    p_back.add_argument("--criteria", default="msd,mwsd",
                        type=lambda s: [c.strip() for c in s.split(",") if c.strip()])
    p_back.add_argument("--references", default="rf,median",
                        type=lambda s: [c.strip() for c in s.split(",") if c.strip()])
    p_back.add_argument("--d-minus", type=float, dest="d_minus")
    p_back.add_argument("--d-plus", type=float, dest="d_plus")
    p_back.add_argument("--solver", choices=("scipy", "command"), default="scipy")
    p_back.add_argument("--solver-command", dest="solver_command")
    p_back.add_argument("--time-limit", type=float, default=600.0, dest="time_limit")
    p_back.add_argument("--gap", type=float, default=1e-6)
    p_back.add_argument("--jobs", type=int, default=1)
    p_back.add_argument("--seed", type=int, default=0)
    p_back.add_argument("--max-windows", type=int, dest="max_windows",
                        help="cap the number of windows (smoke runs)")
    p_back.add_argument("--out", default="study_out", help="output directory")
    p_back.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                        help="render PNG figures alongside the CSVs")
    p_back.set_defaults(func=cmd_backtest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
