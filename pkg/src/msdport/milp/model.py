"""Mixed-integer linear models for benchmark-dominating portfolio search.

Two model families are built here over an asset panel and a sorted benchmark:

* M1 maximizes expected portfolio return subject to the portfolio weakly
  dominating the benchmark for every reverse S-shaped utility (MSD).
* M2 adds the weighted-criterion rows (MWSD): indicator binaries count the
  probability mass of portfolio returns strictly below each benchmark return
  and cap it by the weighting thresholds.

Models are plain data (variables, rows, objective) with no solver ties; the
``solvers`` module turns them into solver calls and the ``io`` module into
LP/MPS files. Conditional constraints are linearized with family-specific
big-M constants derived from the support bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import (
    EPS,
    DiscreteReturnDistribution,
    DistributionError,
    SupportBounds,
    integrated_cdf,
    cdf,
    validate_probs,
)

# Safety margin applied on top of the tight big-M derivation.
BIG_M_MARGIN = 0.01

BIG_M_FAMILIES = ("pairwise", "indicator", "aggregate")


class ModelBuildError(ValueError):
    """Inconsistent inputs to a model builder."""


@dataclass(frozen=True)
class AssetPanel:
    """Return matrix of m base assets over n shared states."""

    returns: np.ndarray  # shape (m, n)
    asset_labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2:
            raise DistributionError(f"panel returns must be 2-D, got shape {r.shape}")
        p = validate_probs(self.probs)
        m, n = r.shape
        if m < 1:
            raise DistributionError("panel needs at least one asset")
        if n != p.size:
            raise DistributionError(f"panel has {n} states but {p.size} probabilities")
        if not np.all(np.isfinite(r)):
            raise DistributionError("panel returns must be finite")
        labels = tuple(str(s) for s in self.asset_labels)
        if len(labels) != m:
            raise DistributionError(f"{m} assets but {len(labels)} labels")
        r = r.copy()
        r.flags.writeable = False
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "asset_labels", labels)

    @property
    def n_assets(self) -> int:
        return self.returns.shape[0]

    @property
    def n_states(self) -> int:
        return self.returns.shape[1]

    def portfolio_returns(self, weights) -> np.ndarray:
        """State returns of the convex combination given by ``weights``."""
        w = np.asarray(weights, dtype=float)
        if w.size != self.n_assets:
            raise ValueError(f"expected {self.n_assets} weights, got {w.size}")
        return w @ self.returns

    def expected_asset_returns(self) -> np.ndarray:
        return self.returns @ self.probs


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "continuous" (non-negative) or "binary"
    upper: float | None = None
    lower: float = 0.0


@dataclass(frozen=True)
class Row:
    """One linear constraint: sum(coeffs) <sense> rhs."""

    name: str
    family: str
    coeffs: dict[str, float]
    sense: str  # "<=", ">=", "=="
    rhs: float


@dataclass(frozen=True)
class MilpModel:
    """Solver-agnostic MILP: variables, rows, objective, and build metadata."""

    name: str
    variables: tuple[Variable, ...]
    rows: tuple[Row, ...]
    objective: dict[str, float]
    objective_sense: str  # "max" or "min"
    big_m_values: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def variable_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def binary_names(self) -> list[str]:
        return [v.name for v in self.variables if v.kind == "binary"]

    def family_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for row in self.rows:
            counts[row.family] = counts.get(row.family, 0) + 1
        return counts


def big_m(bounds: SupportBounds, family: str, reference: float | None = None) -> float:
    """Family-specific big-M constant for the given support bounds.

    Pairwise return comparisons need to absorb at most the support width;
    the reference-indicator rows at most the gain range b - r; the aggregate
    rows bound two integrated-CDF style sums, each at most the support width.
    """
    if family not in BIG_M_FAMILIES:
        raise ValueError(f"unknown big-M family {family!r}, expected one of {BIG_M_FAMILIES}")
    width = bounds.b - bounds.a
    if family == "pairwise":
        base = width
    elif family == "aggregate":
        base = 2.0 * width
    else:
        if reference is None:
            raise ValueError("indicator family needs the reference return")
        if not bounds.a - EPS <= reference <= bounds.b + EPS:
            raise ValueError(f"reference {reference} outside bounds [{bounds.a}, {bounds.b}]")
        base = bounds.b - reference
    return base * (1.0 + BIG_M_MARGIN)


def _check_build_inputs(panel, benchmark, r, bounds) -> None:
    y = benchmark.returns
    if panel.n_states != benchmark.n_states:
        raise ModelBuildError(
            f"panel has {panel.n_states} states, benchmark {benchmark.n_states}"
        )
    if np.any(np.diff(y) < 0):
        raise ModelBuildError("benchmark returns must be sorted ascending (canonical order)")
    if not np.allclose(panel.probs, benchmark.probs, rtol=0.0, atol=1e-12):
        raise ModelBuildError("panel and benchmark must share state probabilities")
    if float(np.min(np.abs(y - r))) > 1e-9:
        raise ModelBuildError(
            f"reference {r} is not a benchmark return; augment the state-space first"
        )
    if not (bounds.contains(panel.returns) and bounds.contains(y)):
        raise ModelBuildError("support bounds do not cover all returns")


def _tightened_bounds(panel: AssetPanel, r: float) -> dict[str, tuple[float, float | None]]:
    """Variable-bound fixings valid for every portfolio on the simplex.

    Because the candidate return is a convex combination, state-return
    differences are bracketed by the per-asset extremes: when every asset has
    x_{j,i} > x_{j,k} the ordering binary is forced on, when none has it the
    binary and its shortfall are forced off, and the shortfall never exceeds
    the largest per-asset difference. Same logic fixes gain indicators whose
    state sits entirely above or below the reference. The projection of the
    feasible set onto the weights is unchanged; only auxiliary-variable
    freedom is removed, which replaces the solver presolve this formulation
    cannot safely use.
    """
    x = panel.returns
    n = panel.n_states
    out: dict[str, tuple[float, float | None]] = {}
    for i in range(n):
        col_i = x[:, i]
        diff = col_i[:, None] - x  # asset-wise x_{j,i} - x_{j,k}
        dmin = diff.min(axis=0)
        dmax = diff.max(axis=0)
        for k in range(n):
            theta_ub = max(0.0, float(dmax[k]))
            if dmin[k] > EPS:
                out[f"z_{i}_{k}"] = (1.0, 1.0)
            elif dmax[k] <= EPS:
                out[f"z_{i}_{k}"] = (0.0, 0.0)
            out[f"theta_{i}_{k}"] = (0.0, theta_ub)
        if col_i.min() > r + EPS:
            out[f"xi_{i}"] = (1.0, 1.0)
        elif col_i.max() <= r + EPS:
            out[f"xi_{i}"] = (0.0, 0.0)
    ref_diff = r - x  # asset-wise r - x_{j,k}
    ref_min = ref_diff.min(axis=0)
    ref_max = ref_diff.max(axis=0)
    for k in range(n):
        out[f"theta_ref_{k}"] = (0.0, max(0.0, float(ref_max[k])))
        if ref_min[k] > EPS:
            out[f"z_ref_{k}"] = (1.0, 1.0)
        elif ref_max[k] <= EPS:
            out[f"z_ref_{k}"] = (0.0, 0.0)
    return out


def _apply_bounds(variables: list[Variable], fixings: dict) -> list[Variable]:
    out = []
    for v in variables:
        if v.name in fixings:
            lo, up = fixings[v.name]
            out.append(Variable(v.name, v.kind, upper=up, lower=lo))
        else:
            out.append(v)
    return out


def build_m1(
    panel: AssetPanel,
    benchmark: DiscreteReturnDistribution,
    r: float,
    bounds: SupportBounds,
    big_m_scale: float = 1.0,
    tighten: bool = True,
) -> MilpModel:
    """MILP maximizing expected return subject to MSD over the benchmark.

    Variable families: portfolio weights lam_j; candidate-vs-benchmark
    shortfalls phi_ik; upper-range slacks psi_k; candidate self-shortfalls
    theta_ik (plus the reference-anchored theta_ref_k) gated by binaries
    z_ik/z_ref_k; gain indicators xi_i; benchmark-vs-candidate shortfalls
    delta_ik on the loss index set. The reference-anchored block closes the
    gain condition at t = r that the per-state rows leave unguarded.

    ``big_m_scale`` multiplies every big-M constant (robustness checks);
    ``tighten`` applies the simplex-implied variable-bound fixings (the
    optimum and the weight-projection of the feasible set are identical
    either way).
    """
    _check_build_inputs(panel, benchmark, r, bounds)
    m, n = panel.n_assets, panel.n_states
    p = panel.probs
    x = panel.returns
    y = benchmark.returns
    b = bounds.b

    m_pair = big_m(bounds, "pairwise") * big_m_scale
    m_ind = big_m(bounds, "indicator", r) * big_m_scale
    m_agg = big_m(bounds, "aggregate") * big_m_scale

    loss_idx = [i for i in range(n) if y[i] <= r + EPS]
    f2y_b = integrated_cdf(benchmark, b)
    f2y_loss = {i: integrated_cdf(benchmark, y[i]) for i in loss_idx}

    variables: list[Variable] = []
    variables += [Variable(f"lam_{j}", "continuous") for j in range(m)]
    variables += [Variable(f"phi_{i}_{k}", "continuous") for i in range(n) for k in range(n)]
    variables += [Variable(f"psi_{k}", "continuous") for k in range(n)]
    variables += [Variable(f"theta_{i}_{k}", "continuous") for i in range(n) for k in range(n)]
    variables += [Variable(f"theta_ref_{k}", "continuous") for k in range(n)]
    variables += [Variable(f"z_{i}_{k}", "binary") for i in range(n) for k in range(n)]
    variables += [Variable(f"z_ref_{k}", "binary") for k in range(n)]
    variables += [Variable(f"xi_{i}", "binary") for i in range(n)]
    variables += [Variable(f"delta_{i}_{k}", "continuous") for i in loss_idx for k in range(n)]

    def lam_terms(state: int, scale: float = 1.0) -> dict[str, float]:
        return {f"lam_{j}": scale * x[j, state] for j in range(m) if x[j, state] != 0.0}

    rows: list[Row] = []

    # Portfolio-vs-benchmark shortfall: phi_ik >= x_i - y_k.
    for i in range(n):
        for k in range(n):
            coeffs = lam_terms(i)
            coeffs[f"phi_{i}_{k}"] = coeffs.get(f"phi_{i}_{k}", 0.0) - 1.0
            rows.append(Row(f"c_phi_{i}_{k}", "phi", coeffs, "<=", float(y[k])))

    # Upper-range slack: psi_k >= b - x_k.
    for k in range(n):
        coeffs = lam_terms(k)
        coeffs[f"psi_{k}"] = coeffs.get(f"psi_{k}", 0.0) + 1.0
        rows.append(Row(f"c_psi_{k}", "psi", coeffs, ">=", float(b)))

    # Self-shortfall link: x_i - x_k + M(1 - z_ik) - theta_ik >= 0.
    for i in range(n):
        for k in range(n):
            coeffs: dict[str, float] = {}
            for j in range(m):
                diff = x[j, i] - x[j, k]
                if diff != 0.0:
                    coeffs[f"lam_{j}"] = diff
            coeffs[f"z_{i}_{k}"] = coeffs.get(f"z_{i}_{k}", 0.0) - m_pair
            coeffs[f"theta_{i}_{k}"] = coeffs.get(f"theta_{i}_{k}", 0.0) - 1.0
            rows.append(Row(f"c_theta_link_{i}_{k}", "theta_link", coeffs, ">=", -m_pair))

    # Self-shortfall gate: M z_ik - theta_ik >= 0.
    for i in range(n):
        for k in range(n):
            rows.append(
                Row(
                    f"c_theta_gate_{i}_{k}",
                    "theta_gate",
                    {f"z_{i}_{k}": m_pair, f"theta_{i}_{k}": -1.0},
                    ">=",
                    0.0,
                )
            )

    # Gain indicator: x_i - r <= M xi_i.
    for i in range(n):
        coeffs = lam_terms(i)
        coeffs[f"xi_{i}"] = coeffs.get(f"xi_{i}", 0.0) - m_ind
        rows.append(Row(f"c_xi_{i}", "xi_gate", coeffs, "<=", float(r)))

    # Aggregate gain condition, active when xi_i = 1:
    # sum_k p_k (phi_ik + psi_k - theta_ik) + M xi_i <= F2_Y(b) + M.
    for i in range(n):
        coeffs = {}
        for k in range(n):
            if p[k] == 0.0:
                continue
            coeffs[f"phi_{i}_{k}"] = p[k]
            coeffs[f"psi_{k}"] = coeffs.get(f"psi_{k}", 0.0) + p[k]
            coeffs[f"theta_{i}_{k}"] = -p[k]
        coeffs[f"xi_{i}"] = coeffs.get(f"xi_{i}", 0.0) + m_agg
        rows.append(Row(f"c_gain_{i}", "gain_agg", coeffs, "<=", f2y_b + m_agg))

    # Gain condition anchored at the reference return itself. The per-state
    # rows above quantify only over candidate returns that exceed r, which
    # leaves the threshold t = r unguarded (a portfolio with no mass above r
    # would pass them vacuously while losing in expectation). This block
    # replays the same shortfall machinery at the constant threshold r:
    # theta_ref_k tracks max(r - x_k, 0) through its binary gate and the
    # benchmark-side constants fold into the right-hand side. t = r is always
    # a gain threshold, so the row carries no indicator.
    f2y_r = integrated_cdf(benchmark, r)
    for k in range(n):
        coeffs = {f"lam_{j}": -x[j, k] for j in range(m) if x[j, k] != 0.0}
        coeffs[f"z_ref_{k}"] = coeffs.get(f"z_ref_{k}", 0.0) - m_pair
        coeffs[f"theta_ref_{k}"] = coeffs.get(f"theta_ref_{k}", 0.0) - 1.0
        rows.append(Row(f"c_theta_link_ref_{k}", "theta_link", coeffs, ">=",
                        -(r + m_pair)))
    for k in range(n):
        rows.append(Row(f"c_theta_gate_ref_{k}", "theta_gate",
                        {f"z_ref_{k}": m_pair, f"theta_ref_{k}": -1.0}, ">=", 0.0))
    coeffs = {}
    for k in range(n):
        if p[k] == 0.0:
            continue
        coeffs[f"psi_{k}"] = coeffs.get(f"psi_{k}", 0.0) + p[k]
        coeffs[f"theta_ref_{k}"] = -p[k]
    if not coeffs:
        coeffs = {"psi_0": 0.0}
    rows.append(Row("c_gain_ref", "gain_agg", coeffs, "<=", f2y_b - f2y_r))

    # Benchmark-vs-portfolio shortfall on losses: delta_ik >= y_i - x_k.
    for i in loss_idx:
        for k in range(n):
            coeffs = lam_terms(k)
            coeffs[f"delta_{i}_{k}"] = coeffs.get(f"delta_{i}_{k}", 0.0) + 1.0
            rows.append(Row(f"c_delta_{i}_{k}", "delta", coeffs, ">=", float(y[i])))

    # Aggregate loss condition: sum_k p_k delta_ik <= F2_Y(y_i).
    for i in loss_idx:
        coeffs = {f"delta_{i}_{k}": p[k] for k in range(n) if p[k] != 0.0}
        # Keep the row meaningful even if every state mass is zero (cannot
        # happen for a valid distribution, but guards degenerate slices).
        if not coeffs:
            coeffs = {f"delta_{i}_0": 0.0}
        rows.append(Row(f"c_loss_{i}", "loss_agg", coeffs, "<=", f2y_loss[i]))

    # Full-investment simplex.
    rows.append(Row("c_simplex", "simplex", {f"lam_{j}": 1.0 for j in range(m)}, "==", 1.0))

    objective = {f"lam_{j}": float(p @ x[j]) for j in range(m)}

    if tighten:
        variables = _apply_bounds(variables, _tightened_bounds(panel, r))

    return MilpModel(
        name="m1",
        variables=tuple(variables),
        rows=tuple(rows),
        objective=objective,
        objective_sense="max",
        big_m_values={"pairwise": m_pair, "indicator": m_ind, "aggregate": m_agg},
        meta={
            "criterion": "msd",
            "reference": float(r),
            "d_minus": None,
            "d_plus": None,
            "f2y_b": f2y_b,
            "f2y_r": f2y_r,
            "loss_index": tuple(loss_idx),
            "n_states": n,
            "n_assets": m,
            "bounds": (bounds.a, bounds.b),
            "asset_labels": panel.asset_labels,
            "tightened": tighten,
        },
    )


def build_m2(
    panel: AssetPanel,
    benchmark: DiscreteReturnDistribution,
    r: float,
    d_minus: float,
    d_plus: float,
    bounds: SupportBounds,
    big_m_scale: float = 1.0,
    tighten: bool = True,
) -> MilpModel:
    """MILP for the weighted criterion: M1 plus strict-CDF counting rows.

    Binaries zeta_ik flag portfolio returns below benchmark return y_i; their
    probability mass is capped by max(F_Y(y_{i-1}), d-) wherever the preceding
    benchmark CDF value sits strictly below 1 - d+.
    """
    for name, d in (("d_minus", d_minus), ("d_plus", d_plus)):
        if not 0.0 <= d <= 1.0:
            raise ModelBuildError(f"{name} must lie in [0, 1], got {d}")
    base = build_m1(panel, benchmark, r, bounds, big_m_scale, tighten=tighten)
    n = panel.n_states
    m = panel.n_assets
    p = panel.probs
    x = panel.returns
    y = benchmark.returns
    m_pair = base.big_m_values["pairwise"]

    variables = list(base.variables)
    variables += [Variable(f"zeta_{i}_{k}", "binary") for i in range(n) for k in range(n)]

    rows = list(base.rows)
    # Strict-shortfall gate: x_k + M zeta_ik >= y_i.
    for i in range(n):
        for k in range(n):
            coeffs = {f"lam_{j}": x[j, k] for j in range(m) if x[j, k] != 0.0}
            coeffs[f"zeta_{i}_{k}"] = coeffs.get(f"zeta_{i}_{k}", 0.0) + m_pair
            rows.append(Row(f"c_zeta_gate_{i}_{k}", "zeta_gate", coeffs, ">=", float(y[i])))

    # Mass cap on flagged states, gated by the preceding benchmark CDF value.
    f_prev = 0.0  # F_Y(y_0) := 0
    zeta_rows = 0
    for i in range(n):
        if f_prev < 1.0 - d_plus - EPS:
            coeffs = {f"zeta_{i}_{k}": p[k] for k in range(n) if p[k] != 0.0}
            if not coeffs:
                coeffs = {f"zeta_{i}_0": 0.0}
            rhs = max(f_prev, d_minus)
            rows.append(Row(f"c_zeta_agg_{i}", "zeta_agg", coeffs, "<=", rhs))
            zeta_rows += 1
        f_prev = cdf(benchmark, y[i])

    if tighten:
        fixings: dict[str, tuple[float, float | None]] = {}
        col_min = x.min(axis=0)
        col_max = x.max(axis=0)
        for i in range(n):
            for k in range(n):
                if col_max[k] < y[i]:
                    fixings[f"zeta_{i}_{k}"] = (1.0, 1.0)  # below for every portfolio
                elif col_min[k] >= y[i]:
                    fixings[f"zeta_{i}_{k}"] = (0.0, 0.0)  # never strictly below
        variables = _apply_bounds(variables, fixings)

    meta = dict(base.meta)
    meta.update(criterion="mwsd", d_minus=float(d_minus), d_plus=float(d_plus),
                zeta_agg_rows=zeta_rows)
    return MilpModel(
        name="m2",
        variables=tuple(variables),
        rows=tuple(rows),
        objective=dict(base.objective),
        objective_sense="max",
        big_m_values=dict(base.big_m_values),
        meta=meta,
    )
