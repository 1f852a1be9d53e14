"""p-values, Monte-Carlo null quantiles and warp-speed power estimation.

Every Monte-Carlo replicate ``i`` draws from its own generator
``default_rng(SeedSequence(seed, spawn_key=(i,)))``, so results depend only on
``(config, seed)`` and not on how replicates are spread over threads.  The
thread count is capped by the ``MIXEDINDEP_THREADS`` environment variable.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .sampling import MarginalSpec, VineSpec, generate_dataset, independence_vine
from .statistics import PreparedStatistic, StatisticKind, prepare_statistic
from .transforms import MixedSample, WeightParams
from .variance import DegenerateVariance

DEFAULT_PERMUTATIONS = 999
DEFAULT_REPLICATES = 10000
THREADS_ENV = "MIXEDINDEP_THREADS"


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return k


def run_replicates(func: Callable[[int], object], count: int, threads: Optional[int] = None) -> list:
    """``[func(0), ..., func(count - 1)]``, possibly evaluated on several threads."""
    threads = worker_count() if threads is None else threads
    if threads <= 1 or count <= 1:
        return [func(i) for i in range(count)]
    chunk = max(1, math.ceil(count / (threads * 4)))
    blocks = [range(lo, min(lo + chunk, count)) for lo in range(0, count, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda r: [func(i) for i in r], blocks)
        return [v for part in parts for v in part]


# --- p-values --------------------------------------------------------------------------


def asymptotic_pvalue(st_i_value: float) -> float:
    """Two-sided standard normal p-value ``2 (1 - Phi(|z|))``."""
    z = float(st_i_value)
    if not math.isfinite(z):
        raise ValueError("statistic must be finite")
    return float(special.erfc(abs(z) / math.sqrt(2.0)))


def draw_permutations(n: int, n_units: int, mode: str, rng: np.random.Generator) -> list:
    """One permutation per permuted unit; the first unit stays in place.

    In two-vector mode the units are the two blocks (so the count block rows
    move jointly); in total mode every column but the first is shuffled
    independently.
    """
    return [None] + [rng.permutation(n) for _ in range(n_units - 1)]


@dataclass
class TestOutcome:
    statistic: str
    mode: str
    value: float
    pvalue: float
    method: str
    params: dict = field(default_factory=dict)
    replicates: int = 0
    seed: Optional[int] = None

    def as_record(self) -> dict:
        return {
            "statistic": self.statistic,
            "mode": self.mode,
            "value": self.value,
            "pvalue": self.pvalue,
            "method": self.method,
            "params": self.params,
            "replicates": self.replicates,
            "seed": self.seed,
        }


def _signed_score(prepared: PreparedStatistic, v):
    return np.abs(v) if prepared.spec.is_signed else v


def permutation_distribution(
    prepared: PreparedStatistic, B: int, seed: int, threads: Optional[int] = None
) -> np.ndarray:
    n, units, mode = prepared.n, prepared.n_units, prepared.spec.mode

    def one(i):
        return prepared.value(draw_permutations(n, units, mode, replicate_rng(seed, i)))

    return np.asarray(run_replicates(one, B, threads), dtype=float)


def permutation_pvalue(
    sample: MixedSample, kind: StatisticKind, B: int = DEFAULT_PERMUTATIONS, seed: int = 0,
    threads: Optional[int] = None,
) -> float:
    """Add-one permutation p-value ``(1 + #{|T*| >= |T|}) / (B + 1)``.

    Absolute values are used for the signed statistics I and st.I only.
    """
    return permutation_test(sample, kind, B, seed, threads).pvalue


def permutation_test(
    sample: MixedSample, kind: StatisticKind, B: int = DEFAULT_PERMUTATIONS, seed: int = 0,
    threads: Optional[int] = None,
) -> TestOutcome:
    if B < 1:
        raise ValueError("need at least one permutation")
    if sample.n < 2:
        raise ValueError("permutation test needs n >= 2")
    prepared = prepare_statistic(sample, kind)
    observed = prepared.value()
    perm = permutation_distribution(prepared, B, seed, threads)
    # guard against rounding making identical statistics look different
    obs = _signed_score(prepared, observed)
    tol = 1e-12 * max(abs(obs), 1e-300)
    count = int(np.sum(_signed_score(prepared, perm) >= obs - tol))
    return TestOutcome(
        kind.label, kind.mode, float(observed), (1 + count) / (B + 1), "permutation",
        _params(kind, sample), B, seed,
    )


def asymptotic_test(sample: MixedSample, kind: StatisticKind) -> TestOutcome:
    if kind.kind != "StI":
        raise ValueError("the normal approximation applies to st.I only")
    value = prepare_statistic(sample, kind).value()
    return TestOutcome(kind.label, kind.mode, value, asymptotic_pvalue(value), "asymptotic", _params(kind, sample))


def _params(kind: StatisticKind, sample: MixedSample) -> dict:
    if kind.kind == "D":
        return {"sigma": list(kind.d_sigma)}
    wp = kind.weight_for(sample)
    return {"a": wp.a.tolist(), "b": wp.b.tolist()}


# --- null quantiles --------------------------------------------------------------------


def null_st_i_values(
    marginals: Sequence[MarginalSpec], wp: WeightParams, n: int, N: int, seed: int,
    mode: str = "two_vector", threads: Optional[int] = None,
) -> np.ndarray:
    """``sqrt(n) I / sigma_hat`` for ``N`` independent null samples (signed)."""
    vine = independence_vine(len(marginals))
    kind = StatisticKind("StI", mode, wp)

    def one(i):
        sample = generate_dataset(marginals, vine, n, replicate_rng(seed, i))
        try:
            return prepare_statistic(sample, kind).value()
        except DegenerateVariance:
            return float("nan")

    return np.asarray(run_replicates(one, N, threads), dtype=float)


def mc_null_quantiles(
    marginals: Sequence[MarginalSpec], wp: WeightParams, n: int, N: int, levels: Sequence[float],
    seed: int, mode: str = "two_vector", threads: Optional[int] = None,
) -> np.ndarray:
    """Empirical quantiles of ``sqrt(n) |I| / sigma_hat`` under independence.

    Samples with a degenerate variance estimate (a constant column) are
    dropped.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("levels must lie in (0, 1)")
    vals = np.abs(null_st_i_values(marginals, wp, n, N, seed, mode, threads))
    vals = vals[np.isfinite(vals)]
    return np.quantile(vals, levels)


# --- warp-speed power ------------------------------------------------------------------


@dataclass
class SimulationConfig:
    """One design (marginals + vine) studied over a grid of statistic cells."""

    marginals: list
    vine: VineSpec
    n: int
    N: int
    cells: list
    seed: int = 0
    alpha: float = 0.05
    design: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.cells:
            raise ValueError("no statistics requested")
        if len(self.marginals) != self.vine.d:
            raise ValueError("marginal count does not match the vine dimension")


def _cell_values(sample: MixedSample, cells, perms_for) -> np.ndarray:
    out = np.empty((len(cells), 2))
    for c, kind in enumerate(cells):
        try:
            prepared = prepare_statistic(sample, kind)
        except DegenerateVariance:
            out[c] = 0.0
            continue
        out[c, 0] = prepared.value()
        out[c, 1] = prepared.value(perms_for(prepared.n_units, kind.mode))
    return out


def warp_speed_values(config: SimulationConfig, threads: Optional[int] = None) -> np.ndarray:
    """Array ``(N, cells, 2)`` of alternative and permuted statistics."""

    def one(i):
        rng = replicate_rng(config.seed, i)
        sample = generate_dataset(config.marginals, config.vine, config.n, rng)
        # one permutation per replicate, shared by all cells of the same shape
        cache: dict = {}

        def perms_for(units, mode):
            key = (units, mode)
            if key not in cache:
                cache[key] = draw_permutations(config.n, units, mode, rng)
            return cache[key]

        return _cell_values(sample, config.cells, perms_for)

    return np.stack(run_replicates(one, config.N, threads))


def warp_speed_rates(values: np.ndarray, cells, alpha: float) -> np.ndarray:
    """Rejection percentages from warp-speed values.

    The alternative statistic is rejected when it exceeds the upper
    ``1 - alpha`` order statistic of the pooled permuted statistics (absolute
    values for I and st.I).
    """
    rates = np.empty(len(cells))
    for c, kind in enumerate(cells):
        alt, null = values[:, c, 0], values[:, c, 1]
        if kind.is_signed:
            alt, null = np.abs(alt), np.abs(null)
        crit = np.quantile(null, 1.0 - alpha, method="higher")
        rates[c] = 100.0 * np.mean(alt > crit)
    return rates


def warp_speed_power(config: SimulationConfig, threads: Optional[int] = None) -> list[dict]:
    """Warp-speed rejection rates, one record per statistic cell."""
    values = warp_speed_values(config, threads)
    rates = warp_speed_rates(values, config.cells, config.alpha)
    records = []
    for kind, rate in zip(config.cells, rates):
        if kind.kind == "D":
            a = b = None
        else:
            wp = kind.weight
            a = None if wp is None else wp.a.tolist()
            b = None if wp is None else wp.b.tolist()
        records.append({
            "statistic": kind.label,
            "mode": kind.mode,
            "a": a,
            "b": b,
            "design": config.design,
            "n": config.n,
            "N": config.N,
            "rejection_rate_pct": float(rate),
        })
    return records

