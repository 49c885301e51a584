"""Distribution primitives: frozen examples, quadrature oracle, invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdport.core import (
    DiscreteReturnDistribution,
    DistributionError,
    SupportBounds,
    canonicalize,
    cdf,
    expected_return,
    integrated_cdf,
    merged_grid,
    strict_cdf,
)

THIRD = 1.0 / 3.0


def quadrature_icdf(d: DiscreteReturnDistribution, t: float, a: float) -> float:
    """Independent oracle: Riemann sum of the empirical CDF over [a, t]."""
    if t <= a:
        return 0.0
    grid = np.linspace(a, t, 200_001)
    mids = 0.5 * (grid[:-1] + grid[1:])
    f_vals = np.array([np.sum(d.probs[d.returns <= mv]) for mv in mids])
    return float(np.sum(f_vals) * (grid[1] - grid[0]))


class TestCanonicalize:
    def test_sort_permutation(self):
        pair = canonicalize([3, 0, 1], [2, -1, 0], [THIRD] * 3)
        np.testing.assert_allclose(pair.y.returns, [-1, 0, 2])
        np.testing.assert_allclose(pair.x.returns, [0, 1, 3])

    def test_stable_ties(self):
        pair = canonicalize([1, 2], [0, 0], [0.5, 0.5])
        np.testing.assert_allclose(pair.x.returns, [1, 2])
        np.testing.assert_array_equal(pair.permutation, [0, 1])

    def test_singleton(self):
        pair = canonicalize([1], [5], [1.0])
        assert pair.x.returns[0] == 1 and pair.y.returns[0] == 5

    def test_length_mismatch(self):
        with pytest.raises(DistributionError):
            canonicalize([1, 2], [1, 2, 3], [0.5, 0.5])

    def test_bad_probs(self):
        with pytest.raises(DistributionError):
            canonicalize([1, 2], [1, 2], [0.7, 0.7])

    def test_idempotent(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 9))
            x, y = rng.uniform(-5, 5, n), rng.uniform(-5, 5, n)
            p = rng.dirichlet(np.ones(n))
            once = canonicalize(x, y, p)
            twice = canonicalize(once.x.returns, once.y.returns, once.probs)
            np.testing.assert_array_equal(once.x.returns, twice.x.returns)
            np.testing.assert_array_equal(once.y.returns, twice.y.returns)


class TestCdf:
    def test_interior_point(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert cdf(d, 0.5) == pytest.approx(THIRD, abs=1e-15)

    def test_below_support(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert cdf(d, -0.1) == 0.0

    def test_at_and_above_max(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert cdf(d, 3.0) == pytest.approx(1.0, abs=1e-15)
        assert cdf(d, 99.0) == 1.0

    def test_right_continuous_atom_included(self):
        d = DiscreteReturnDistribution([0.0, 1.0], [0.25, 0.75])
        assert cdf(d, 1.0) == pytest.approx(1.0)
        assert cdf(d, 1.0 - 1e-6) == pytest.approx(0.25)


class TestStrictCdf:
    def test_strictly_below(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert strict_cdf(d, 1.0) == pytest.approx(THIRD, abs=1e-15)

    def test_at_min(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert strict_cdf(d, 0.0) == 0.0

    def test_above_max(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert strict_cdf(d, 3.1) == 1.0

    def test_never_exceeds_cdf(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 9))
            d = DiscreteReturnDistribution(rng.uniform(-5, 5, n), rng.dirichlet(np.ones(n)))
            t = float(rng.uniform(-6, 6))
            assert strict_cdf(d, t) <= cdf(d, t) + 1e-15


class TestIntegratedCdf:
    def test_benchmark_at_zero(self):
        y = DiscreteReturnDistribution.with_uniform_probs([-1, 0, 2])
        assert integrated_cdf(y, 0.0) == pytest.approx(THIRD, abs=1e-15)

    def test_below_support(self):
        y = DiscreteReturnDistribution.with_uniform_probs([-1, 0, 2])
        assert integrated_cdf(y, -1.0) == 0.0
        assert integrated_cdf(y, -5.0) == 0.0

    def test_at_upper_bound(self):
        y = DiscreteReturnDistribution.with_uniform_probs([-1, 0, 2])
        assert integrated_cdf(y, 2.0) == pytest.approx(5.0 / 3.0, abs=1e-15)

    def test_matches_quadrature_oracle(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 7))
            d = DiscreteReturnDistribution(
                np.round(rng.uniform(-4, 4, n), 3), rng.dirichlet(np.ones(n))
            )
            a = float(d.returns.min()) - 1.0
            for t in rng.uniform(-4, 5, size=3):
                expected = quadrature_icdf(d, float(t), a)
                assert integrated_cdf(d, float(t)) == pytest.approx(expected, abs=1e-4)

    def test_terminal_identity(self, rng):
        # F2(b) = b - E[X] whenever b clears the support.
        for _ in range(50):
            n = int(rng.integers(1, 9))
            d = DiscreteReturnDistribution(rng.uniform(-5, 5, n), rng.dirichlet(np.ones(n)))
            b = float(d.returns.max()) + float(rng.uniform(0, 3))
            assert integrated_cdf(d, b) == pytest.approx(b - expected_return(d), abs=1e-10)

    def test_convex_subgradient(self, rng):
        # F2(t2) - F2(t1) >= F(t1) (t2 - t1) for t2 >= t1.
        for _ in range(50):
            n = int(rng.integers(1, 9))
            d = DiscreteReturnDistribution(rng.uniform(-5, 5, n), rng.dirichlet(np.ones(n)))
            t1, t2 = np.sort(rng.uniform(-6, 6, size=2))
            lhs = integrated_cdf(d, float(t2)) - integrated_cdf(d, float(t1))
            assert lhs >= cdf(d, float(t1)) * (t2 - t1) - 1e-12

    def test_non_decreasing(self, rng):
        d = DiscreteReturnDistribution(rng.uniform(-5, 5, 6), rng.dirichlet(np.ones(6)))
        ts = np.linspace(-6, 6, 41)
        vals = [integrated_cdf(d, float(t)) for t in ts]
        assert np.all(np.diff(vals) >= -1e-12)


class TestExpectedReturn:
    def test_uniform(self):
        d = DiscreteReturnDistribution.with_uniform_probs([0, 1, 3])
        assert expected_return(d) == pytest.approx(4.0 / 3.0, abs=1e-15)

    def test_degenerate(self):
        assert expected_return(DiscreteReturnDistribution([5.0], [1.0])) == 5.0

    def test_zero_probability_state_is_free(self):
        base = DiscreteReturnDistribution([0.0, 1.0, 3.0], [THIRD, THIRD, THIRD])
        aug = DiscreteReturnDistribution([0, 1, 3, 42.0], [THIRD, THIRD, THIRD, 0.0])
        assert expected_return(aug) == pytest.approx(expected_return(base), abs=1e-12)
        for t in (-1.0, 0.5, 3.0, 50.0):
            assert cdf(aug, t) == pytest.approx(cdf(base, t) if t < 42 else 1.0, abs=1e-12)
            assert integrated_cdf(aug, t) == pytest.approx(integrated_cdf(base, t), abs=1e-12)


class TestValidation:
    def test_probs_must_sum_to_one(self):
        with pytest.raises(DistributionError):
            DiscreteReturnDistribution([1.0, 2.0], [0.6, 0.5])

    def test_returns_must_be_finite(self):
        with pytest.raises(DistributionError):
            DiscreteReturnDistribution([np.inf, 0.0], [0.5, 0.5])

    def test_empty_rejected(self):
        with pytest.raises(DistributionError):
            DiscreteReturnDistribution([], [])

    def test_immutable(self):
        d = DiscreteReturnDistribution([1.0], [1.0])
        with pytest.raises(ValueError):
            d.returns[0] = 2.0

    def test_support_bounds_order(self):
        with pytest.raises(DistributionError):
            SupportBounds(2.0, 2.0)


@given(
    returns=st.lists(st.floats(-50, 50), min_size=1, max_size=8),
    t=st.floats(-60, 60),
)
@settings(max_examples=200, deadline=None)
def test_cdf_bounds_property(returns, t):
    d = DiscreteReturnDistribution.with_uniform_probs(returns)
    value = cdf(d, t)
    assert -1e-12 <= value <= 1 + 1e-12
    assert strict_cdf(d, t) <= value + 1e-15
    assert integrated_cdf(d, t) >= 0.0


def test_merged_grid_sorted_unique():
    a = DiscreteReturnDistribution.with_uniform_probs([3, 1, 1])
    b = DiscreteReturnDistribution.with_uniform_probs([2, 1, 0])
    grid = merged_grid(a, b)
    np.testing.assert_array_equal(grid, [0, 1, 2, 3])
