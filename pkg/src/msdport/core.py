"""Exact primitives for discrete return distributions.

Distributions are finite lists of (return, probability) states. Returns are
monthly percentages. All functions here are closed-form sums over states; no
sampling or interpolation is involved. Probability and return comparisons use
a single absolute tolerance ``EPS`` so that knife-edge ties coming from
floating-point accumulation are treated as equalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Absolute tolerance for return/probability comparisons. Sums of ~1e3 doubles
# in [0,1] stay well inside this.
EPS = 1e-9

# Tolerance on total probability mass.
PROB_SUM_TOL = 1e-12


class DistributionError(ValueError):
    """Invalid distribution data (bad probabilities, shape mismatch, ...)."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DistributionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def validate_probs(probs) -> np.ndarray:
    """Return ``probs`` as an array after checking it is a probability vector.

    Zero entries are allowed (needed for reference-state augmentation);
    the mass must sum to 1 within ``PROB_SUM_TOL``.
    """
    p = _as_float_array(probs, "probs")
    if p.size < 1:
        raise DistributionError("need at least one state")
    if not np.all(np.isfinite(p)):
        raise DistributionError("probabilities must be finite")
    if np.any(p < -PROB_SUM_TOL) or np.any(p > 1 + PROB_SUM_TOL):
        raise DistributionError("probabilities must lie in [0, 1]")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-9:
        raise DistributionError(f"probabilities sum to {total!r}, expected 1")
    return p


@dataclass(frozen=True)
class DiscreteReturnDistribution:
    """A discrete return distribution over n states.

    ``returns`` are monthly returns in percent, ``probs`` the state
    probabilities. Instances are immutable; the backing arrays are frozen.
    """

    returns: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        r = _as_float_array(self.returns, "returns")
        p = validate_probs(self.probs)
        if r.size != p.size:
            raise DistributionError(f"{r.size} returns but {p.size} probabilities")
        if r.size < 1:
            raise DistributionError("need at least one state")
        if not np.all(np.isfinite(r)):
            raise DistributionError("returns must be finite")
        r = r.copy()
        p = p.copy()
        r.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "probs", p)

    @property
    def n_states(self) -> int:
        return self.returns.size

    @classmethod
    def with_uniform_probs(cls, returns) -> "DiscreteReturnDistribution":
        r = _as_float_array(returns, "returns")
        return cls(r, np.full(r.size, 1.0 / r.size))

    def sorted_by_return(self) -> "DiscreteReturnDistribution":
        """States permuted to ascending return order (stable)."""
        order = np.argsort(self.returns, kind="stable")
        return DiscreteReturnDistribution(self.returns[order], self.probs[order])


@dataclass(frozen=True)
class SupportBounds:
    """A closed interval [a, b] enclosing every return under consideration."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise DistributionError("support bounds must be finite")
        if self.a >= self.b:
            raise DistributionError(f"need a < b, got [{self.a}, {self.b}]")

    @classmethod
    def covering(cls, *return_sets, pad: float = 0.0) -> "SupportBounds":
        """Tight bounds over all given arrays, optionally padded on each side."""
        lo = min(float(np.min(np.asarray(r, dtype=float))) for r in return_sets)
        hi = max(float(np.max(np.asarray(r, dtype=float))) for r in return_sets)
        if lo == hi:
            # Degenerate support: open the interval symmetrically.
            pad = max(pad, 0.5)
        return cls(lo - pad, hi + pad)

    def contains(self, values) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(v >= self.a - EPS) and np.all(v <= self.b + EPS))


@dataclass(frozen=True)
class CanonicalPair:
    """Candidate X and benchmark Y on a shared state-space, Y sorted ascending.

    The joint permutation that produced the canonical order is retained for
    traceability. ``x.probs`` and ``y.probs`` are the same vector.
    """

    x: DiscreteReturnDistribution
    y: DiscreteReturnDistribution
    permutation: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.x.n_states != self.y.n_states:
            raise DistributionError("X and Y must share the state-space")
        if not np.array_equal(self.x.probs, self.y.probs):
            raise DistributionError("X and Y must share state probabilities")
        yr = self.y.returns
        if np.any(np.diff(yr) < 0):
            raise DistributionError("benchmark returns must be non-decreasing")
        perm = self.permutation
        if perm is None:
            perm = np.arange(self.x.n_states)
        perm = np.asarray(perm, dtype=int).copy()
        perm.flags.writeable = False
        object.__setattr__(self, "permutation", perm)

    @property
    def probs(self) -> np.ndarray:
        return self.y.probs

    @property
    def n_states(self) -> int:
        return self.y.n_states


def canonicalize(x_returns, y_returns, probs) -> CanonicalPair:
    """Jointly permute states so the benchmark returns are non-decreasing.

    The sort is stable: states with tied benchmark returns keep their original
    relative order, which fixes reproducibility but does not affect any
    dominance verdict.
    """
    x = _as_float_array(x_returns, "x_returns")
    y = _as_float_array(y_returns, "y_returns")
    p = validate_probs(probs)
    if not (x.size == y.size == p.size):
        raise DistributionError(
            f"length mismatch: x has {x.size}, y has {y.size}, probs has {p.size}"
        )
    order = np.argsort(y, kind="stable")
    return CanonicalPair(
        x=DiscreteReturnDistribution(x[order], p[order]),
        y=DiscreteReturnDistribution(y[order], p[order]),
        permutation=order,
    )


def cdf(d: DiscreteReturnDistribution, t: float) -> float:
    """P(return <= t): right-continuous step function of t."""
    return float(d.probs[d.returns <= t + EPS].sum())


def strict_cdf(d: DiscreteReturnDistribution, t: float) -> float:
    """P(return < t): the left limit of the CDF at t."""
    return float(d.probs[d.returns < t - EPS].sum())


def integrated_cdf(d: DiscreteReturnDistribution, t: float) -> float:
    """Integral of the CDF from below the support up to t.

    For a discrete distribution this collapses to the exact closed form
    sum_i p_i * max(t - x_i, 0); it is non-decreasing, convex and piecewise
    linear in t, and equals t - E[X] once t clears the support.
    """
    return float((d.probs * np.maximum(t - d.returns, 0.0)).sum())


def expected_return(d: DiscreteReturnDistribution) -> float:
    """Probability-weighted mean return."""
    return float(d.probs @ d.returns)


def merged_grid(*dists: DiscreteReturnDistribution) -> np.ndarray:
    """Sorted unique return levels across all given distributions."""
    return np.unique(np.concatenate([d.returns for d in dists]))
