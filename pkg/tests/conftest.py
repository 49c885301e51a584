"""Shared builders for synthetic instances and datasets."""

from __future__ import annotations

import numpy as np
import pytest

from msdport.core import DiscreteReturnDistribution, SupportBounds, canonicalize
from msdport.milp.model import AssetPanel


def random_pair(rng, n_max=8, coarse=False):
    """A random canonical (X, Y) pair, optionally on a coarse grid for ties."""
    n = int(rng.integers(2, n_max + 1))
    if coarse:
        x = rng.integers(-10, 11, size=n) * 0.5
        y = rng.integers(-10, 11, size=n) * 0.5
    else:
        x = rng.uniform(-5, 5, size=n)
        y = rng.uniform(-5, 5, size=n)
    if rng.random() < 0.5:
        p = np.full(n, 1.0 / n)
    else:
        p = rng.dirichlet(np.ones(n))
        if n > 2 and rng.random() < 0.2:
            p[int(rng.integers(0, n))] = 0.0
            p /= p.sum()
    return canonicalize(x, y, p)


def random_panel_instance(rng, n_max=10, m_max=3, coarse=True):
    """A random (panel, benchmark, r, bounds) instance for MILP tests."""
    n = int(rng.integers(3, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    if coarse:
        x = rng.integers(-10, 11, size=(m, n)) * 0.5
        y = np.sort(rng.integers(-10, 11, size=n) * 0.5)
    else:
        x = rng.uniform(-5, 5, size=(m, n))
        y = np.sort(rng.uniform(-5, 5, size=n))
    p = np.full(n, 1.0 / n) if rng.random() < 0.5 else rng.dirichlet(np.ones(n))
    bench = DiscreteReturnDistribution(y, p)
    panel = AssetPanel(x, tuple(f"a{j}" for j in range(m)), p)
    r = float(y[int(rng.integers(0, n))])
    bounds = SupportBounds.covering(x, y, [r])
    return panel, bench, r, bounds


def simplex_lattice(m: int, step: float = 0.05) -> np.ndarray:
    """All weight vectors on the m-simplex with coordinates in step multiples."""
    k = round(1.0 / step)
    points = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            points.append(prefix + [remaining])
            return
        for units in range(remaining + 1):
            rec(prefix + [units], remaining - units, slots - 1)

    rec([], k, m)
    return np.asarray(points, dtype=float) * step


def month_range(start: int, count: int) -> np.ndarray:
    """Contiguous YYYYMM stamps."""
    out = []
    year, month = divmod(start, 100)
    for _ in range(count):
        out.append(year * 100 + month)
        month += 1
        if month == 13:
            month = 1
            year += 1
    return np.asarray(out, dtype=int)


def synthetic_market(rng, n_industries: int, months: int, easy: bool = True):
    """Industry matrix plus benchmark/T-bill vectors in percent per month.

    With ``easy`` the benchmark trails the first industry state-wise, so a
    single-asset dominating portfolio always exists and solvers stay fast.
    """
    market = rng.normal(0.9, 4.0, size=months)
    beta = rng.uniform(0.7, 1.3, size=n_industries)
    alpha = rng.normal(0.15, 0.2, size=n_industries)
    idio = rng.normal(0.0, 2.5, size=(n_industries, months))
    inds = alpha[:, None] + beta[:, None] * market[None, :] + idio
    if easy:
        bench = inds[0] - np.abs(rng.normal(0.5, 0.2, size=months))
    else:
        w = rng.dirichlet(np.ones(n_industries))
        bench = w @ inds - np.abs(rng.normal(0.5, 0.2, size=months))
    tbill = np.clip(rng.normal(0.35, 0.08, size=months), 0.01, None)
    return inds, bench, tbill


def write_ff49_file(path, dates, matrix, banner=True):
    """Write an industry file in the Fama-French text layout (49 columns)."""
    names = [f"Ind{j:02d}" for j in range(matrix.shape[0])]
    lines = []
    if banner:
        lines += [
            "This file was created for testing.",
            "  Missing data are indicated by -99.99 or -999.",
            "",
            "  Average Value Weighted Returns -- Monthly",
        ]
    lines.append("," + ",".join(names))
    for t, stamp in enumerate(dates):
        row = ",".join(f"{matrix[j, t]:.4f}" for j in range(matrix.shape[0]))
        lines.append(f"{stamp},{row}")
    path.write_text("\n".join(lines) + "\n")
    return names


def write_series_file(path, dates, values):
    lines = ["date,value"]
    for stamp, v in zip(dates, values):
        lines.append(f"{stamp},{v:.6f}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
