"""Markowitz stochastic dominance portfolio toolkit.

Decide MSD/MWSD dominance between discrete return distributions, build and
solve the matching mixed-integer portfolio optimization models, and run
rolling-window benchmark-efficiency studies.
"""

from .core import (
    CanonicalPair,
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
from .dominance import (
    DominanceSpec,
    DominanceVerdict,
    PiecewisePwf,
    ReverseSUtility,
    check,
    check_fsd,
    check_msd,
    check_mwsd,
    compute_t_bounds,
    markowitz_value,
    msd_witness,
    sample_pwfs,
    sample_utilities,
    weighted_markowitz_value,
)

__version__ = "0.1.0"

__all__ = [
    "CanonicalPair",
    "DiscreteReturnDistribution",
    "DistributionError",
    "SupportBounds",
    "canonicalize",
    "cdf",
    "expected_return",
    "integrated_cdf",
    "merged_grid",
    "strict_cdf",
    "DominanceSpec",
    "DominanceVerdict",
    "PiecewisePwf",
    "ReverseSUtility",
    "check",
    "check_fsd",
    "check_msd",
    "check_mwsd",
    "compute_t_bounds",
    "markowitz_value",
    "msd_witness",
    "sample_pwfs",
    "sample_utilities",
    "weighted_markowitz_value",
    "__version__",
]
