"""Independence tests for mixed continuous and count data.

The tests compare the joint Laplace-transform / probability-generating
function of ``(X, Y)`` with the product of its marginals under a weight
``w(s, t) = exp(-a s) t^b``.  See :mod:`mixedindep.statistics` for the
statistics, :mod:`mixedindep.inference` for p-values and simulation studies,
and :mod:`mixedindep.sampling` for copula-based data generation.
"""
from .inference import (
    SimulationConfig,
    TestOutcome,
    asymptotic_pvalue,
    asymptotic_test,
    mc_null_quantiles,
    permutation_pvalue,
    permutation_test,
    warp_speed_power,
)
from .quadrature import QuadratureRule, oracle_statistic
from .sampling import (
    CopulaModel,
    MarginalSpec,
    VineEdge,
    VineSpec,
    copula_pair_sample,
    default_vine,
    generate_dataset,
    independence_vine,
    marginal_quantile,
    vine_sample,
)
from .statistics import (
    StatisticKind,
    compute_statistic,
    d_statistic,
    i_statistic,
    standardized_i,
    t_statistic,
)
from .transforms import MixedSample, TransformPoint, WeightParams
from .variance import DegenerateVariance, sigma_hat, sigma_hat_sq

__version__ = "0.1.0"

__all__ = [
    "CopulaModel", "DegenerateVariance", "MarginalSpec", "MixedSample", "QuadratureRule",
    "SimulationConfig", "StatisticKind", "TestOutcome", "TransformPoint", "VineEdge", "VineSpec",
    "WeightParams", "asymptotic_pvalue", "asymptotic_test", "compute_statistic",
    "copula_pair_sample", "d_statistic", "default_vine", "generate_dataset", "i_statistic",
    "independence_vine", "marginal_quantile", "mc_null_quantiles", "oracle_statistic",
    "permutation_pvalue", "permutation_test", "sigma_hat", "sigma_hat_sq", "standardized_i",
    "t_statistic", "vine_sample", "warp_speed_power",
]


def bundled_path(name: str) -> str:
    """Filesystem path of a bundled data file or config, e.g. ``"data/bike_sharing.csv"``."""
    from importlib import resources

    return str(resources.files(__name__) / name)
