"""Solver adapters and solution certification.

An adapter turns a ``MilpModel`` into one blocking solver call and maps the
result onto a ``SolveOutcome``. Two adapters ship here:

* ``ScipyMilpAdapter`` links the HiGHS solver bundled with scipy.
* ``CommandLineAdapter`` shells out: it writes an MPS file, runs a user
  command with ``{mps}``/``{sol}`` placeholders, and parses the solution
  file as name/value pairs. Useful for external solver binaries.

``certify`` replays an optimal solution through the exact dominance
checkers; it is the safety net against big-M or tolerance defects and must
hold for every optimal solve.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.optimize as sopt
import scipy.sparse as sp

from ..core import CanonicalPair, DiscreteReturnDistribution, SupportBounds
from ..dominance import DominanceSpec, DominanceVerdict, check_msd, check_mwsd
from .io import export_mps, parse_solution_file
from .model import AssetPanel, MilpModel

STATUSES = ("optimal", "infeasible", "time-limit", "error")


@dataclass(frozen=True)
class SolveLimits:
    """Per-instance resource limits."""

    time: float = 600.0
    gap: float = 1e-6


@dataclass(frozen=True)
class SolveOutcome:
    """Result of one solver call."""

    status: str
    objective: float | None = None
    weights: np.ndarray | None = None
    values: dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    gap: float | None = None
    message: str = ""

    def __post_init__(self):
        assert self.status in STATUSES, self.status


class SolverError(RuntimeError):
    """Adapter-level failure (missing binary, inconsistent result, ...)."""


def _weight_names(model: MilpModel) -> list[str]:
    names = [n for n in model.variable_names() if n.startswith("lam_")]
    return sorted(names, key=lambda s: int(s.rsplit("_", 1)[1]))


def _extract_weights(model: MilpModel, values: dict[str, float]) -> np.ndarray:
    return np.array([values.get(n, 0.0) for n in _weight_names(model)])


class ScipyMilpAdapter:
    """In-process HiGHS via scipy.optimize.milp.

    Presolve defaults to off: the dominance models have structurally tight
    rows (zero slack at the support edges) on which this HiGHS build's
    presolve has been observed to declare feasible instances infeasible.
    Opt back in at your own risk via ``presolve=True``.
    """

    serializes_access = False
    name = "scipy-highs"

    def __init__(self, presolve: bool = False):
        self.presolve = presolve

    def solve(self, model: MilpModel, limits: SolveLimits, seed: int | None = None) -> SolveOutcome:
        # HiGHS via scipy exposes no seed control; runs are deterministic for
        # a fixed model anyway, so the seed is accepted and ignored.
        del seed
        index = {v.name: i for i, v in enumerate(model.variables)}
        n_vars = len(index)

        c = np.zeros(n_vars)
        for name, coef in model.objective.items():
            c[index[name]] = coef
        sign = -1.0 if model.objective_sense == "max" else 1.0

        integrality = np.zeros(n_vars, dtype=int)
        lb = np.zeros(n_vars)
        ub = np.full(n_vars, np.inf)
        for i, v in enumerate(model.variables):
            lb[i] = v.lower
            if v.kind == "binary":
                integrality[i] = 1
                ub[i] = 1.0
            if v.upper is not None:
                ub[i] = v.upper

        data, cols, indptr = [], [], [0]
        row_lb, row_ub = [], []
        for row in model.rows:
            for name, coef in row.coeffs.items():
                cols.append(index[name])
                data.append(coef)
            indptr.append(len(cols))
            if row.sense == "<=":
                row_lb.append(-np.inf)
                row_ub.append(row.rhs)
            elif row.sense == ">=":
                row_lb.append(row.rhs)
                row_ub.append(np.inf)
            else:
                row_lb.append(row.rhs)
                row_ub.append(row.rhs)
        a_matrix = sp.csr_matrix(
            (np.asarray(data), np.asarray(cols), np.asarray(indptr)),
            shape=(len(model.rows), n_vars),
        )

        start = time.perf_counter()
        res = sopt.milp(
            sign * c,
            constraints=sopt.LinearConstraint(a_matrix, np.asarray(row_lb), np.asarray(row_ub)),
            integrality=integrality,
            bounds=sopt.Bounds(lb, ub),
            options={
                "time_limit": limits.time,
                "mip_rel_gap": limits.gap,
                "presolve": self.presolve,
                "disp": False,
            },
        )
        wall = time.perf_counter() - start

        status = {0: "optimal", 1: "time-limit", 2: "infeasible"}.get(res.status, "error")
        values: dict[str, float] = {}
        objective = None
        weights = None
        if res.x is not None:
            values = {v.name: float(res.x[i]) for i, v in enumerate(model.variables)}
            objective = float(sign * res.fun)
            weights = _extract_weights(model, values)
        gap = float(res.mip_gap) if getattr(res, "mip_gap", None) is not None else None
        return SolveOutcome(
            status=status,
            objective=objective,
            weights=weights,
            values=values,
            wall_time=wall,
            gap=gap,
            message=str(res.message),
        )


class CommandLineAdapter:
    """Generic subprocess adapter speaking MPS in, solution file out.

    ``command`` is a template with ``{mps}`` and ``{sol}`` placeholders
    (optional: ``{time}``, ``{gap}``, ``{seed}``). The command must write
    'name value' lines to the solution path; an exit code of 0 with no
    usable solution file is reported as infeasible. A solution is reported
    as optimal as claimed by the solver; run ``certify`` to validate it.
    """

    serializes_access = True
    name = "command"

    def __init__(self, command: str, keep_files: bool = False):
        if "{mps}" not in command:
            raise ValueError("command template must contain {mps}")
        self.command = command
        self.keep_files = keep_files

    def solve(self, model: MilpModel, limits: SolveLimits, seed: int | None = None) -> SolveOutcome:
        start = time.perf_counter()
        with tempfile.TemporaryDirectory(prefix="msdport_solve_") as tmp:
            mps_path = Path(tmp) / "model.mps"
            sol_path = Path(tmp) / "model.sol"
            export_mps(model, mps_path)
            rendered = self.command.format(
                mps=str(mps_path),
                sol=str(sol_path),
                time=limits.time,
                gap=limits.gap,
                seed=0 if seed is None else seed,
            )
            try:
                proc = subprocess.run(
                    shlex.split(rendered),
                    capture_output=True,
                    text=True,
                    timeout=limits.time + 60.0,
                )
            except FileNotFoundError as exc:
                raise SolverError(f"solver binary not found: {exc}") from exc
            except subprocess.TimeoutExpired:
                return SolveOutcome(status="time-limit", wall_time=time.perf_counter() - start,
                                    message="subprocess timeout")
            wall = time.perf_counter() - start
            if proc.returncode != 0:
                return SolveOutcome(status="error", wall_time=wall,
                                    message=proc.stderr.strip() or proc.stdout.strip())
            if not sol_path.exists() or not sol_path.stat().st_size:
                return SolveOutcome(status="infeasible", wall_time=wall,
                                    message="solver wrote no solution file")
            values = parse_solution_file(sol_path)
        if not values:
            return SolveOutcome(status="infeasible", wall_time=wall,
                                message="empty solution file")
        objective = sum(coef * values.get(name, 0.0) for name, coef in model.objective.items())
        return SolveOutcome(
            status="optimal",
            objective=float(objective),
            weights=_extract_weights(model, values),
            values=values,
            wall_time=wall,
            gap=None,
            message="solution file parsed",
        )


def solve(model: MilpModel, adapter, limits: SolveLimits | None = None,
          seed: int | None = None) -> SolveOutcome:
    """Run one adapter call and sanity-check an optimal outcome.

    On ``optimal`` the weights must form a unit simplex point within 1e-6
    and the reported objective must match the expected-return recomputation
    from the weights within 1e-6; otherwise the outcome is downgraded to an
    error (a solver or big-M defect, never silently accepted).
    """
    if limits is None:
        limits = SolveLimits()
    outcome = adapter.solve(model, limits, seed=seed)
    if outcome.status != "optimal":
        return outcome
    w = outcome.weights
    problems = []
    if w is None:
        problems.append("optimal status without weights")
    else:
        if abs(float(w.sum()) - 1.0) > 1e-6 or np.any(w < -1e-6):
            problems.append(f"weights violate the simplex (sum={w.sum()!r})")
        recomputed = sum(
            coef * outcome.values.get(name, 0.0) for name, coef in model.objective.items()
        )
        if abs(recomputed - outcome.objective) > 1e-6:
            problems.append(
                f"objective mismatch: reported {outcome.objective!r}, recomputed {recomputed!r}"
            )
    if problems:
        return SolveOutcome(
            status="error",
            objective=outcome.objective,
            weights=w,
            values=outcome.values,
            wall_time=outcome.wall_time,
            gap=outcome.gap,
            message="; ".join(problems),
        )
    return outcome


def certify(
    outcome: SolveOutcome,
    panel: AssetPanel,
    benchmark: DiscreteReturnDistribution,
    spec: DominanceSpec,
    bounds: SupportBounds,
) -> DominanceVerdict:
    """Replay an optimal solution through the exact dominance checkers.

    Reconstructs the portfolio return vector from the weights and checks the
    claimed criterion with the certification tolerance carried by ``spec``
    (looser than solver feasibility noise). A failing verdict is returned
    with its violation list so callers can flag the defect.
    """
    if outcome.status != "optimal":
        raise ValueError(f"can only certify optimal outcomes, got {outcome.status!r}")
    x = panel.portfolio_returns(outcome.weights)
    pair = CanonicalPair(
        x=DiscreteReturnDistribution(x, panel.probs),
        y=benchmark,
    )
    if spec.criterion == "mwsd":
        return check_mwsd(pair, spec, bounds)
    return check_msd(pair, spec, bounds)


CERTIFICATION_TOLERANCE = 1e-6


def certification_spec(criterion: str, reference: float, d_minus: float = 1.0,
                       d_plus: float = 1.0) -> DominanceSpec:
    """Dominance spec with the default certification tolerance."""
    return DominanceSpec(
        criterion=criterion,
        reference=reference,
        d_minus=d_minus,
        d_plus=d_plus,
        tolerance=CERTIFICATION_TOLERANCE,
    )
