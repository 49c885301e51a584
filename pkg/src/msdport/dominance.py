"""Dominance checks between a candidate and a benchmark distribution.

Three criteria are supported on a shared discrete state-space:

* FSD:  the candidate's CDF never exceeds the benchmark's.
* MSD:  dominance for every non-decreasing reverse S-shaped utility
          (concave over losses, convex over gains, split at a reference
          return r). Decided by comparing integrated CDFs at candidate
          returns above r and benchmark returns at or below r.
* MWSD: MSD strengthened by an FSD requirement over a sub-interval
          controlled by probability-weighting thresholds d- and d+; decided
          by a per-state grid condition on the benchmark returns.

The checkers are exact over the discrete grid. For cross-validation this
module also carries a finite-dimensional family of reverse S-shaped
utilities and prefix-concave probability weighting functions together with
the (weighted) expected-value functionals they induce, so that any verdict
can be stress-tested against directly evaluated preferences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .core import (
    EPS,
    CanonicalPair,
    DiscreteReturnDistribution,
    SupportBounds,
    cdf,
    expected_return,
    integrated_cdf,
    merged_grid,
    strict_cdf,
)

CRITERIA = ("fsd", "msd", "mwsd")


class ReferenceNotOnGridError(ValueError):
    """The reference return does not coincide with any benchmark return."""


@dataclass(frozen=True)
class DominanceSpec:
    """Parameters of a dominance question.

    ``reference`` is the return level separating losses from gains; for MSD
    and MWSD it must coincide (within tolerance) with a benchmark return;
    augment the state-space first if it does not. ``d_minus``/``d_plus``
    bound the probability-weighting distortion admitted by MWSD.
    """

    criterion: str = "msd"
    reference: float = 0.0
    d_minus: float = 1.0
    d_plus: float = 1.0
    tolerance: float = EPS

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}, expected one of {CRITERIA}")
        for name, d in (("d_minus", self.d_minus), ("d_plus", self.d_plus)):
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {d}")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")


@dataclass(frozen=True)
class Violation:
    """One failed inequality: which condition, at which state, lhs vs rhs."""

    condition: str
    state: int
    lhs: float
    rhs: float

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "state": self.state,
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


@dataclass(frozen=True)
class DominanceVerdict:
    """Outcome of a dominance check plus diagnostics."""

    holds: bool
    violations: tuple[Violation, ...]
    t_d_minus: float
    t_d_plus: float
    criterion: str = "msd"

    def __post_init__(self):
        assert self.holds == (len(self.violations) == 0)

    def as_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "holds": self.holds,
            "t_d_minus": self.t_d_minus,
            "t_d_plus": self.t_d_plus,
            "violations": [v.as_dict() for v in self.violations],
        }


def _require_reference_on_grid(pair: CanonicalPair, spec: DominanceSpec) -> None:
    gap = float(np.min(np.abs(pair.y.returns - spec.reference)))
    if gap > 1e-9:
        raise ReferenceNotOnGridError(
            f"reference {spec.reference} is {gap:.3g} away from the nearest benchmark "
            "return; augment the state-space with a zero-probability reference state first"
        )


def _default_bounds(pair: CanonicalPair, spec: DominanceSpec) -> SupportBounds:
    return SupportBounds.covering(pair.x.returns, pair.y.returns, [spec.reference])


def check_fsd(pair: CanonicalPair, tolerance: float = EPS) -> bool:
    """First-order dominance of X over Y on the merged return grid."""
    return not _fsd_violations(pair, tolerance)


def _fsd_violations(pair: CanonicalPair, tolerance: float) -> list[Violation]:
    out = []
    for idx, t in enumerate(merged_grid(pair.x, pair.y)):
        fx, fy = cdf(pair.x, t), cdf(pair.y, t)
        if fx > fy + tolerance:
            out.append(Violation("fsd", idx, fx, fy))
    return out


def compute_t_bounds(
    pair: CanonicalPair, spec: DominanceSpec, bounds: SupportBounds | None = None
) -> tuple[float, float]:
    """Endpoints of the interval on which MWSD forces first-order dominance.

    ``t_d_minus`` is the supremum of {a} and of the t <= r where both CDFs
    stay at or below d-; ``t_d_plus`` the infimum of {b} and of the t >= r
    where both CDFs have reached 1 - d+. Both land on grid points, a, b or r.
    """
    if bounds is None:
        bounds = _default_bounds(pair, spec)
    r, dm, dp = spec.reference, spec.d_minus, spec.d_plus
    grid = merged_grid(pair.x, pair.y)

    # First grid point where either CDF escapes d-: below it both are <= d-.
    t_low = None
    for t in grid:
        if max(cdf(pair.x, t), cdf(pair.y, t)) > dm + EPS:
            t_low = float(t)
            break
    t_d_minus = r if t_low is None else min(t_low, r)
    t_d_minus = max(bounds.a, t_d_minus)

    # First grid point where both CDFs have reached 1 - d+.
    t_high = None
    for t in grid:
        if min(cdf(pair.x, t), cdf(pair.y, t)) >= 1.0 - dp - EPS:
            t_high = float(t)
            break
    t_d_plus = r if t_high is None else max(t_high, r)
    t_d_plus = min(bounds.b, t_d_plus)
    return t_d_minus, t_d_plus


def check_msd(
    pair: CanonicalPair, spec: DominanceSpec, bounds: SupportBounds | None = None
) -> DominanceVerdict:
    """Decide whether X weakly dominates Y for all reverse S-shaped utilities.

    Gains: at every candidate return above r, the benchmark's remaining
    integrated-CDF mass up to b must be at least the candidate's.
    Losses: at every benchmark return at or below r, the benchmark's
    integrated CDF must be at least the candidate's.
    """
    _require_reference_on_grid(pair, spec)
    if bounds is None:
        bounds = _default_bounds(pair, spec)
    if not (bounds.contains(pair.x.returns) and bounds.contains(pair.y.returns)):
        raise ValueError("support bounds do not cover all returns")
    r, tol = spec.reference, spec.tolerance
    x, y = pair.x, pair.y

    f2x_b = integrated_cdf(x, bounds.b)
    f2y_b = integrated_cdf(y, bounds.b)
    violations = []
    for i, xi in enumerate(x.returns):
        if xi > r + EPS:
            lhs = f2y_b - integrated_cdf(y, xi)
            rhs = f2x_b - integrated_cdf(x, xi)
            if lhs < rhs - tol:
                violations.append(Violation("msd-gain", i, lhs, rhs))
    # The gain condition at the reference itself. It is not implied by the
    # candidate-return conditions: a candidate with no mass above r (or one
    # whose remaining-integral gap dips exactly at r) passes them vacuously
    # while losing in expectation, so every admissible utility with a kink at
    # r refutes it. Anchoring one check at t = r closes that hole.
    lhs = f2y_b - integrated_cdf(y, r)
    rhs = f2x_b - integrated_cdf(x, r)
    if lhs < rhs - tol:
        i_ref = int(np.argmin(np.abs(y.returns - r)))
        violations.append(Violation("msd-gain-ref", i_ref, lhs, rhs))
    for i, yi in enumerate(y.returns):
        if yi <= r + EPS:
            lhs = integrated_cdf(y, yi)
            rhs = integrated_cdf(x, yi)
            if lhs < rhs - tol:
                violations.append(Violation("msd-loss", i, lhs, rhs))

    t_lo, t_hi = compute_t_bounds(pair, spec, bounds)
    return DominanceVerdict(
        holds=not violations,
        violations=tuple(violations),
        t_d_minus=t_lo,
        t_d_plus=t_hi,
        criterion="msd",
    )


def check_mwsd(
    pair: CanonicalPair, spec: DominanceSpec, bounds: SupportBounds | None = None
) -> DominanceVerdict:
    """Decide weighted MSD: MSD plus first-order dominance on [t_d-, t_d+).

    Two certificate families are produced. The per-state grid condition
    bounds the candidate's strict CDF at each benchmark return y_i by
    max(F_Y(y_{i-1}), d-) wherever the preceding benchmark CDF sits strictly
    below 1 - d+. That condition alone can miss crossings when the interval
    endpoint is pinned at the reference rather than at its threshold (large
    d with the reference in a tail), so the candidate CDF is additionally
    scanned against the benchmark CDF over the merged grid restricted to
    [t_d-, t_d+), which decides the criterion exactly. Strict comparisons
    snap values within EPS to equality so discrete knife-edge ties do not
    flip verdicts.
    """
    if bounds is None:
        bounds = _default_bounds(pair, spec)
    msd = check_msd(pair, spec, bounds)
    y = pair.y
    tol = spec.tolerance
    violations = list(msd.violations)
    f_prev = 0.0  # F_Y(y_0) := 0
    for i, yi in enumerate(y.returns):
        if f_prev < 1.0 - spec.d_plus - EPS:
            lhs = strict_cdf(pair.x, yi)
            rhs = max(f_prev, spec.d_minus)
            if lhs > rhs + tol:
                violations.append(Violation("mwsd-grid", i, lhs, rhs))
        f_prev = cdf(y, yi)

    # Interval first-order check covering the endpoint-at-reference cases.
    t_lo, t_hi = msd.t_d_minus, msd.t_d_plus
    scan_points = [t_lo] + [
        float(t) for t in merged_grid(pair.x, pair.y) if t_lo < t < t_hi - EPS
    ]
    for idx, t in enumerate(scan_points):
        fx, fy = cdf(pair.x, t), cdf(pair.y, t)
        if fx > fy + tol:
            violations.append(Violation("mwsd-interval", idx, fx, fy))

    return DominanceVerdict(
        holds=not violations,
        violations=tuple(violations),
        t_d_minus=msd.t_d_minus,
        t_d_plus=msd.t_d_plus,
        criterion="mwsd",
    )


def check(
    pair: CanonicalPair, spec: DominanceSpec, bounds: SupportBounds | None = None
) -> DominanceVerdict:
    """Dispatch on ``spec.criterion``."""
    if spec.criterion == "fsd":
        violations = tuple(_fsd_violations(pair, spec.tolerance))
        t_lo, t_hi = compute_t_bounds(pair, spec, bounds)
        return DominanceVerdict(not violations, violations, t_lo, t_hi, "fsd")
    if spec.criterion == "msd":
        return check_msd(pair, spec, bounds)
    return check_mwsd(pair, spec, bounds)


# ---------------------------------------------------------------------------
# Reverse S-shaped utilities and probability weighting functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReverseSUtility:
    """Continuous piecewise-linear utility, concave on losses, convex on gains.

    Breakpoints are interior knots on each side of the reference; slopes are
    per segment in ascending-t order. Non-negative slopes make the function
    non-decreasing; non-increasing loss slopes give concavity below the
    reference and non-decreasing gain slopes convexity above it. The value is
    anchored at u(reference) = 0 (dominance comparisons are shift-invariant).
    """

    reference: float
    bounds: SupportBounds
    loss_breakpoints: tuple[float, ...] = ()
    loss_slopes: tuple[float, ...] = (1.0,)
    gain_breakpoints: tuple[float, ...] = ()
    gain_slopes: tuple[float, ...] = (1.0,)
    label: str = ""

    def __post_init__(self):
        a, b, r = self.bounds.a, self.bounds.b, self.reference
        if not a - EPS <= r <= b + EPS:
            raise ValueError(f"reference {r} outside bounds [{a}, {b}]")
        lb, gb = np.asarray(self.loss_breakpoints), np.asarray(self.gain_breakpoints)
        if lb.size and not (np.all(np.diff(lb) > 0) and lb[0] > a and lb[-1] < r):
            raise ValueError("loss breakpoints must increase strictly inside (a, r)")
        if gb.size and not (np.all(np.diff(gb) > 0) and gb[0] > r and gb[-1] < b):
            raise ValueError("gain breakpoints must increase strictly inside (r, b)")
        ls, gs = np.asarray(self.loss_slopes), np.asarray(self.gain_slopes)
        if ls.size != lb.size + 1 or gs.size != gb.size + 1:
            raise ValueError("need exactly one slope per segment on each side")
        if np.any(ls < -EPS) or np.any(gs < -EPS):
            raise ValueError("slopes must be non-negative")
        if np.any(np.diff(ls) > EPS):
            raise ValueError("loss slopes must be non-increasing in t (concavity)")
        if np.any(np.diff(gs) < -EPS):
            raise ValueError("gain slopes must be non-decreasing in t (convexity)")

    @cached_property
    def _knots(self) -> tuple[np.ndarray, np.ndarray]:
        a, b, r = self.bounds.a, self.bounds.b, self.reference
        ts = np.concatenate(([a], self.loss_breakpoints, [r], self.gain_breakpoints, [b]))
        slopes = np.concatenate((self.loss_slopes, self.gain_slopes))
        vals = np.zeros(ts.size)
        i_ref = len(self.loss_breakpoints) + 1
        # Integrate slopes outward from u(r) = 0.
        for k in range(i_ref, ts.size - 1):
            vals[k + 1] = vals[k] + slopes[k] * (ts[k + 1] - ts[k])
        for k in range(i_ref, 0, -1):
            vals[k - 1] = vals[k] - slopes[k - 1] * (ts[k] - ts[k - 1])
        return ts, vals

    def __call__(self, t):
        ts, vals = self._knots
        t = np.asarray(t, dtype=float)
        if np.any(t < self.bounds.a - EPS) or np.any(t > self.bounds.b + EPS):
            raise ValueError("return outside the utility's support bounds")
        out = np.interp(t, ts, vals)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def identity(cls, reference: float, bounds: SupportBounds) -> "ReverseSUtility":
        return cls(reference, bounds, label="identity")

    @classmethod
    def gain_witness(cls, threshold: float, reference: float, bounds: SupportBounds):
        """u(t) = max(t - threshold, 0) for a threshold in gains."""
        if threshold <= reference + EPS:
            gb, gs = (), (1.0,)
        else:
            gb, gs = (min(threshold, bounds.b - EPS),), (0.0, 1.0)
        return cls(
            reference,
            bounds,
            loss_slopes=(0.0,),
            gain_breakpoints=gb,
            gain_slopes=gs,
            label=f"gain-witness@{threshold:g}",
        )

    @classmethod
    def loss_witness(cls, threshold: float, reference: float, bounds: SupportBounds):
        """u(t) = min(t - threshold, 0) for a threshold in losses."""
        if threshold >= reference - EPS:
            lb, ls = (), (1.0,)
        else:
            lb, ls = (max(threshold, bounds.a + EPS),), (1.0, 0.0)
        return cls(
            reference,
            bounds,
            loss_breakpoints=lb,
            loss_slopes=ls,
            gain_slopes=(0.0,),
            label=f"loss-witness@{threshold:g}",
        )


@dataclass(frozen=True)
class PiecewisePwf:
    """Strictly increasing piecewise-linear weighting of cumulative probability.

    Maps [0,1] onto [0,1]; segment slopes are non-increasing over the concave
    prefix [0, concave_prefix]. Only the prefix shape is constrained; beyond
    it any strictly increasing continuation is admissible.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    concave_prefix: float = 1.0
    label: str = ""

    def __post_init__(self):
        q = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if q.size != v.size or q.size < 2:
            raise ValueError("breakpoints and values must match and have length >= 2")
        if abs(q[0]) > EPS or abs(q[-1] - 1) > EPS or abs(v[0]) > EPS or abs(v[-1] - 1) > EPS:
            raise ValueError("a weighting function must map [0,1] onto [0,1]")
        if np.any(np.diff(q) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) <= 0):
            raise ValueError("values must be strictly increasing")
        if not 0.0 <= self.concave_prefix <= 1.0:
            raise ValueError("concave_prefix must lie in [0, 1]")
        slopes = np.diff(v) / np.diff(q)
        # Concavity is enforced on segments contained in the prefix.
        inside = q[1:] <= self.concave_prefix + EPS
        s_in = slopes[inside]
        if np.any(np.diff(s_in) > EPS):
            raise ValueError("segment slopes must be non-increasing on the concave prefix")

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = np.interp(q, self.breakpoints, self.values)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def identity(cls, concave_prefix: float = 1.0) -> "PiecewisePwf":
        return cls((0.0, 1.0), (0.0, 1.0), concave_prefix, label="identity")


def markowitz_value(d: DiscreteReturnDistribution, u: ReverseSUtility) -> float:
    """Expected utility sum(p_i * u(x_i)) under a reverse S-shaped utility."""
    return float(d.probs @ u(d.returns))


def weighted_markowitz_value(
    d: DiscreteReturnDistribution,
    u: ReverseSUtility,
    w_minus: PiecewisePwf,
    w_plus: PiecewisePwf,
    r: float,
) -> float:
    """Rank-dependent expected utility with separate loss/gain weighting.

    States are ranked by return. Losses (returns <= r) receive increments of
    w-(F) walking the CDF up from 0; gains receive increments of w+(1 - F)
    walking the decumulative probability down to 0. An atom exactly at r
    counts as a loss, matching the loss-side condition of the MSD check.
    """
    if abs(r - u.reference) > 1e-9:
        raise ValueError(f"utility reference {u.reference} does not match r={r}")
    srt = d.sorted_by_return()
    cum = np.cumsum(srt.probs)
    cum_prev = np.concatenate(([0.0], cum[:-1]))
    # CDF evaluated *at the return value* so tied atoms share the jump.
    f_at = np.array([cdf(srt, t) for t in srt.returns])
    f_before = np.array([strict_cdf(srt, t) for t in srt.returns])
    # Within a run of ties, walk the cumulative mass through the run so the
    # increments of w over the run telescope across its full jump.
    lo = np.maximum(f_before, cum_prev)
    hi = np.minimum(f_at, cum)
    util = u(srt.returns)
    is_loss = srt.returns <= r + EPS
    total = 0.0
    for i in range(srt.n_states):
        if is_loss[i]:
            total += util[i] * (w_minus(hi[i]) - w_minus(lo[i]))
        else:
            total += util[i] * (w_plus(1.0 - lo[i]) - w_plus(1.0 - hi[i]))
    return float(total)


def sample_utilities(
    r: float, bounds: SupportBounds, count: int, seed: int
) -> list[ReverseSUtility]:
    """Deterministic family of admissible utilities for oracle checks.

    The identity is always first; gain and loss witness kinks at randomized
    thresholds follow, then fully random reverse S-shapes with 3-8 breakpoints
    per side, loss slopes sorted non-increasing and gain slopes non-decreasing.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    a, b = bounds.a, bounds.b
    out: list[ReverseSUtility] = [ReverseSUtility.identity(r, bounds)]
    while len(out) < count:
        k = len(out)
        if k % 3 == 1:
            t_plus = float(rng.uniform(r, b))
            out.append(ReverseSUtility.gain_witness(t_plus, r, bounds))
        elif k % 3 == 2:
            t_minus = float(rng.uniform(a, r)) if r > a else a
            out.append(ReverseSUtility.loss_witness(t_minus, r, bounds))
        else:
            out.append(_random_reverse_s(rng, r, bounds))
    return out[:count]


def _random_reverse_s(rng: np.random.Generator, r: float, bounds: SupportBounds):
    a, b = bounds.a, bounds.b

    def side(lo: float, hi: float, decreasing: bool):
        width = hi - lo
        if width <= 4 * EPS:
            return (), (float(rng.uniform(0.0, 2.0)),)
        n_bp = int(rng.integers(3, 9))
        bps = np.sort(rng.uniform(lo + EPS, hi - EPS, size=n_bp))
        bps = np.unique(bps)
        slopes = rng.uniform(0.0, 2.0, size=bps.size + 1)
        slopes = np.sort(slopes)[::-1] if decreasing else np.sort(slopes)
        return tuple(bps), tuple(slopes)

    lb, ls = side(a, r, decreasing=True)
    gb, gs = side(r, b, decreasing=False)
    return ReverseSUtility(r, bounds, lb, ls, gb, gs, label="random")


def sample_pwfs(d: float, count: int, seed: int) -> list[PiecewisePwf]:
    """Deterministic family of admissible weighting functions for a prefix d.

    The identity is always first. Random members place a knot exactly at d,
    use non-increasing positive slopes on [0, d] and free positive slopes
    beyond, then rescale so the function maps onto [0, 1].
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = [PiecewisePwf.identity(d)]
    while len(out) < count:
        out.append(_random_prefix_concave_pwf(rng, d))
    return out[:count]


def _random_prefix_concave_pwf(rng: np.random.Generator, d: float) -> PiecewisePwf:
    knots = [0.0]
    if d > 1e-6:
        inner = np.sort(rng.uniform(0.0, d, size=int(rng.integers(0, 3))))
        knots += [q for q in inner if 1e-6 < q < d - 1e-6]
        knots.append(d)
    if d < 1.0 - 1e-6:
        inner = np.sort(rng.uniform(d, 1.0, size=int(rng.integers(0, 3))))
        knots += [q for q in inner if d + 1e-6 < q < 1.0 - 1e-6]
    knots.append(1.0)
    q = np.unique(np.asarray(knots))
    n_prefix = int(np.sum(q[1:] <= d + EPS))
    pre = np.sort(rng.uniform(0.2, 3.0, size=n_prefix))[::-1]
    post = rng.uniform(0.2, 3.0, size=q.size - 1 - n_prefix)
    slopes = np.concatenate((pre, post))
    v = np.concatenate(([0.0], np.cumsum(slopes * np.diff(q))))
    v /= v[-1]
    return PiecewisePwf(tuple(q), tuple(v), d, label="random")


def msd_witness(
    pair: CanonicalPair, spec: DominanceSpec, bounds: SupportBounds | None = None
) -> Optional[ReverseSUtility]:
    """An admissible utility that strictly prefers the benchmark, if MSD fails.

    A gain violation at threshold t+ yields u(t) = max(t - t+, 0); a loss
    violation at t- yields u(t) = min(t - t-, 0). Either utility's value gap
    equals the violated inequality's slack, so it is strictly positive.
    Returns None when dominance holds.
    """
    if bounds is None:
        bounds = _default_bounds(pair, spec)
    verdict = check_msd(pair, spec, bounds)
    if verdict.holds:
        return None
    v = verdict.violations[0]
    if v.condition == "msd-gain":
        threshold = float(pair.x.returns[v.state])
        return ReverseSUtility.gain_witness(threshold, spec.reference, bounds)
    if v.condition == "msd-gain-ref":
        return ReverseSUtility.gain_witness(spec.reference, spec.reference, bounds)
    threshold = float(pair.y.returns[v.state])
    return ReverseSUtility.loss_witness(threshold, spec.reference, bounds)
