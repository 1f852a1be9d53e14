"""Closed-form I, T and standardized I statistics, and the ecf statistic D.

All four statistics are V-statistics built from per-row (I) or per-pair
(T, D) kernels.  A statistic is first *prepared* into a list of kernel
"units": the two blocks in two-vector mode, or every column in total mode.
Re-indexing the units reproduces the statistic of a row-permuted sample
without recomputing any kernel, which is what the permutation engine uses.

For T and D with unit kernels ``K_1, ..., K_U``::

    value = mean(prod_u K_u) + prod_u mean(K_u) - 2 Re mean_i prod_u rowmean(K_u)_i

which is the factorized form of the multi-index sum over ``n^(U + 1)``
index tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .quadrature import ecf_axis_kernel, gaussian_axis, tensor_chunks
from .transforms import MixedSample, WeightParams, normalize_mode, reciprocal_columns
from .variance import DegenerateVariance, sigma_hat_sq

KINDS = ("I", "T", "StI", "D")
_KIND_ALIASES = {"i": "I", "t": "T", "sti": "StI", "st.i": "StI", "d": "D"}

DEFAULT_D_SIGMA = 0.5
# "orthant": [0, inf)^{r1} x [0, 1]^{r2}; "full": the whole of R^{r1 + r2}
D_DOMAINS = ("orthant", "full")


def normalize_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown statistic {kind!r}; expected one of {KINDS}") from None


def default_weight(mode: str, r1: int, r2: int) -> WeightParams:
    """a = 1, b = 5 between vectors; a = 1, b = 1 for total independence."""
    b = 5.0 if normalize_mode(mode) == "two_vector" else 1.0
    return WeightParams.broadcast(1.0, b, r1, r2)


@dataclass(frozen=True)
class StatisticKind:
    """Which statistic to compute and with which tuning.

    ``weight`` may be left as ``None`` to use :func:`default_weight`;
    ``d_sigma`` is the pair of Gaussian-weight scales for the continuous and
    count axes of D and ``d_domain`` its integration domain.
    """

    kind: str
    mode: str = "two_vector"
    weight: Optional[WeightParams] = None
    d_sigma: tuple = (DEFAULT_D_SIGMA, DEFAULT_D_SIGMA)
    d_domain: str = "orthant"

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        sig = tuple(float(v) for v in np.broadcast_to(np.asarray(self.d_sigma, dtype=float), (2,)))
        if min(sig) <= 0:
            raise ValueError("d_sigma components must be positive")
        object.__setattr__(self, "d_sigma", sig)
        if self.d_domain not in D_DOMAINS:
            raise ValueError(f"unknown D domain {self.d_domain!r}; expected one of {D_DOMAINS}")

    @property
    def is_signed(self) -> bool:
        return self.kind in ("I", "StI")

    def weight_for(self, sample: MixedSample) -> WeightParams:
        if self.weight is None:
            return default_weight(self.mode, sample.r1, sample.r2)
        self.weight.check(sample.r1, sample.r2)
        return self.weight

    @property
    def label(self) -> str:
        return {"I": "I", "T": "T", "StI": "st.I", "D": "D"}[self.kind]


@dataclass(frozen=True)
class StatValue:
    value: float
    kind: StatisticKind
    n: int


def _check_sample(sample: MixedSample) -> None:
    if sample.n < 1:
        raise ValueError("empty sample")


def _units(cols: np.ndarray, r1: int, mode: str, combine) -> list:
    """Group per-column kernels into units: two blocks, or one unit per column."""
    if mode == "total":
        return [cols[d] for d in range(len(cols))]
    return [combine(cols[:r1]), combine(cols[r1:])]


def _hadamard(arrs):
    out = arrs[0]
    for a in arrs[1:]:
        out = out * a
    return out


def _row_units(sample: MixedSample, wp: WeightParams, mode: str) -> list[np.ndarray]:
    u = reciprocal_columns(sample, wp)
    return _units([u[:, d] for d in range(u.shape[1])], sample.r1, mode, _hadamard)


def _t_units(sample: MixedSample, wp: WeightParams, mode: str) -> list[np.ndarray]:
    cols = [1.0 / (xj[:, None] + xj[None, :] + a) for xj, a in zip(sample.x.T, wp.a)]
    cols += [1.0 / (yk[:, None] + yk[None, :] + b + 1.0) for yk, b in zip(sample.y.T, wp.b)]
    return _units(cols, sample.r1, mode, _hadamard)


def _d_units(sample: MixedSample, d_sigma, mode: str, m: int, domain: str = "orthant") -> list[np.ndarray]:
    s1, s2 = d_sigma
    dx, dy = ("half_line", "unit") if domain == "orthant" else ("line", "line")
    cols = [ecf_axis_kernel(xj[:, None] - xj[None, :], s1, dx, m=m) for xj in sample.x.T]
    cols += [
        ecf_axis_kernel(yk[:, None] - yk[None, :], s2, dy, m=m, integer=True)
        for yk in sample.y.T
    ]
    return _units(cols, sample.r1, mode, _hadamard)


def _i_value(units: Sequence[np.ndarray]) -> float:
    joint = float(np.mean(_hadamard(list(units))))
    marg = math.prod(float(np.mean(u)) for u in units)
    return joint - marg


def _v_value(units: Sequence[np.ndarray]) -> float:
    units = list(units)
    first = np.mean(_hadamard(units))
    second = 1.0
    rows = []
    for k in units:
        second = second * np.mean(k)
        rows.append(np.mean(k, axis=1))
    cross = np.mean(_hadamard(rows))
    return float(np.real(first + second - 2.0 * cross))


@dataclass
class PreparedStatistic:
    """Kernels of one statistic on one sample, ready for permutation.

    ``value(perms)`` evaluates the statistic after re-indexing unit ``u`` by
    ``perms[u]`` (``None`` leaves a unit in place).
    """

    spec: StatisticKind
    n: int
    units: list
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n_units(self) -> int:
        return len(self.units)

    def _permuted(self, perms):
        if perms is None:
            return self.units
        out = []
        for k, p in zip(self.units, perms):
            if p is None:
                out.append(k)
            elif k.ndim == 1:
                out.append(k[p])
            else:
                out.append(k[np.ix_(p, p)])
        return out

    def value(self, perms=None) -> float:
        units = self._permuted(perms)
        if self.spec.kind in ("I", "StI"):
            return self.scale * _i_value(units)
        return self.scale * _v_value(units)


def prepare_statistic(sample: MixedSample, spec: StatisticKind, d_nodes: int = 32) -> PreparedStatistic:
    """Precompute the kernels of ``spec`` on ``sample``."""
    _check_sample(sample)
    mode = spec.mode
    if spec.kind == "D":
        units = _d_units(sample, spec.d_sigma, mode, d_nodes, spec.d_domain)
        return PreparedStatistic(spec, sample.n, units, float(sample.n))
    wp = spec.weight_for(sample)
    if spec.kind == "T":
        return PreparedStatistic(spec, sample.n, _t_units(sample, wp, mode))
    units = _row_units(sample, wp, mode)
    if spec.kind == "I":
        return PreparedStatistic(spec, sample.n, units)
    if sample.n < 2:
        raise ValueError("standardized I needs n >= 2")
    var = sigma_hat_sq(sample, wp, mode)
    if not var > 0:
        raise DegenerateVariance("variance estimate is zero (a transformed column is constant)")
    sig = math.sqrt(var)
    # the variance estimate only uses per-column moments, so it is unchanged by permutation
    return PreparedStatistic(spec, sample.n, units, math.sqrt(sample.n) / sig, {"sigma_hat": sig})


def i_statistic(sample: MixedSample, wp: WeightParams, mode: str = "two_vector") -> float:
    """Weighted integral of the empirical process.

    Two-vector mode: ``mean(kx * ky) - mean(kx) mean(ky)`` with
    ``kx = prod_j 1/(X_ij + a_j)`` and ``ky = prod_k 1/(Y_ik + b_k + 1)``.
    Total mode replaces the second term with the product of all
    per-coordinate means.
    """
    _check_sample(sample)
    return _i_value(_row_units(sample, wp, normalize_mode(mode)))


def t_statistic(sample: MixedSample, wp: WeightParams, mode: str = "two_vector") -> float:
    """Weighted squared L2 norm of the empirical process.

    Uses the pair kernels ``1/(X_ij + X_lj + a_j)`` and
    ``1/(Y_ik + Y_lk + b_k + 1)``; cost is ``O(n^2 (r1 + r2))``.  Tiny
    negative results from rounding are returned as is.
    """
    _check_sample(sample)
    return _v_value(_t_units(sample, wp, normalize_mode(mode)))


def standardized_i(sample: MixedSample, wp: WeightParams, mode: str = "two_vector") -> float:
    """``sqrt(n) * I / sigma_hat``.

    Raises
    ------
    DegenerateVariance
        If the variance estimate is zero.
    """
    spec = StatisticKind("StI", mode, wp)
    return prepare_statistic(sample, spec).value()


def d_statistic(
    sample: MixedSample,
    d_sigma=DEFAULT_D_SIGMA,
    mode: str = "two_vector",
    m: int = 32,
    method: str = "factorized",
    domain: str = "orthant",
) -> float:
    """n times the Gaussian-weighted squared distance between the joint
    empirical characteristic function and the product of its marginals.

    The integral runs over ``[0, inf)^{r1} x [0, 1]^{r2}`` with weight
    ``exp(-0.5 sigma1^2 |s|^2 - 0.5 sigma2^2 |t|^2)``; ``domain="full"``
    integrates over all of ``R^{r1 + r2}`` instead.

    Parameters
    ----------
    d_sigma : float or pair
        Weight scales for the continuous and count axes.
    m : int
        Gauss-Legendre nodes per panel of each axis rule.
    method : {"factorized", "grid"}
        ``"factorized"`` integrates each axis separately inside the
        V-statistic expansion.  ``"grid"`` evaluates the integrand on the
        full tensor grid of the same axis rules; it is exponential in the
        dimension and meant for checking.
    """
    _check_sample(sample)
    spec = StatisticKind("D", mode, None, d_sigma, domain)
    if method == "factorized":
        return prepare_statistic(sample, spec, d_nodes=m).value()
    if method != "grid":
        raise ValueError(f"unknown method {method!r}")
    if domain != "orthant":
        raise ValueError("the grid evaluation covers the orthant domain only")
    return _d_grid(sample, spec, m)


def _d_grid(sample: MixedSample, spec: StatisticKind, m: int) -> float:
    s1, s2 = spec.d_sigma
    data = np.hstack([sample.x, sample.y.astype(float)])
    axes = []
    for d in range(data.shape[1]):
        col = data[:, d]
        span = float(col.max() - col.min())
        if d < sample.r1:
            axes.append(gaussian_axis(s1, "half_line", span, m))
        else:
            axes.append(gaussian_axis(s2, "unit", span, m))
    r1 = sample.r1
    total = 0.0
    for pts, wts in tensor_chunks(axes, chunk=1 << 14):
        phase = np.exp(1j * pts[:, None, :] * data[None, :, :])  # (K, n, d)
        joint = np.mean(np.prod(phase, axis=2), axis=1)
        if spec.mode == "two_vector":
            marg = np.mean(np.prod(phase[:, :, :r1], axis=2), axis=1) * np.mean(
                np.prod(phase[:, :, r1:], axis=2), axis=1
            )
        else:
            marg = np.prod(np.mean(phase, axis=1), axis=1)
        total += float(np.dot(np.abs(joint - marg) ** 2, wts))
    return sample.n * total


def compute_statistic(sample: MixedSample, spec: StatisticKind) -> StatValue:
    return StatValue(prepare_statistic(sample, spec).value(), spec, sample.n)
