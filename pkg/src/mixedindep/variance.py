"""Variance estimators for the standardized I statistic and analytic covariance kernels.

The analytic part (``AnalyticMarginal``, :func:`cov_kernel`,
:func:`sigma_sq_by_quadrature`, :func:`analytic_sigma_sq`) is restricted to
exponential and Poisson margins, which have closed-form transforms; it serves
as an oracle for the plug-in estimator :func:`sigma_hat`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .quadrature import QuadratureRule, tensor_chunks, weighted_axes
from .transforms import MixedSample, WeightParams, normalize_mode, reciprocal_columns

# Poisson series in the moment oracle stop once the upper tail is below this.
_POISSON_TAIL = 1e-12


class DegenerateVariance(ValueError):
    """The variance estimate is zero, so the standardized statistic is undefined."""


def _elementary_symmetric(c: np.ndarray) -> np.ndarray:
    """``e_0, ..., e_r`` of the entries of ``c``."""
    e = np.zeros(c.size + 1)
    e[0] = 1.0
    for v in c:
        e[1:] = e[1:] + v * e[:-1]
    return e


def total_sigma_sq(m1: np.ndarray, m2: np.ndarray) -> float:
    """Total-independence variance from per-coordinate first and second moments.

    Evaluates ``prod m2 + (r - 1) prod m1^2 - sum_d m2_d prod_{j != d} m1_j^2``
    in the equivalent form ``prod m1^2 * sum_{k >= 2} e_k(c)`` with
    ``c_d = (m2_d - m1_d^2) / m1_d^2``, which has no cancellation.
    """
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    sq = m1 * m1
    c = np.maximum(m2 - sq, 0.0) / sq
    return float(np.prod(sq) * np.sum(_elementary_symmetric(c)[2:]))


def sigma_hat_sq(sample: MixedSample, wp: WeightParams, mode: str = "two_vector") -> float:
    """Plug-in estimate of the asymptotic variance of ``sqrt(n) I``.

    In two-vector mode this is the product of the two sample variances (with
    ``n - 1`` denominators) of the row-wise products ``prod 1/(X_ij + a_j)``
    and ``prod 1/(Y_ik + b_k + 1)``.  In total mode the per-coordinate sample
    means and bias-corrected second moments are plugged into the total
    independence variance (see :func:`total_sigma_sq`); for ``r1 = r2 = 1``
    both modes give the same number.

    The estimate is exactly 0 when a block product is constant (two-vector
    mode) or when fewer than two transformed columns vary (total mode).
    """
    mode = normalize_mode(mode)
    if sample.n < 2:
        raise ValueError("variance estimate needs n >= 2")
    u = reciprocal_columns(sample, wp)
    if mode == "two_vector":
        kx = np.prod(u[:, : sample.r1], axis=1)
        ky = np.prod(u[:, sample.r1 :], axis=1)
        return float(_exact_var(kx) * _exact_var(ky))
    m1 = u.mean(axis=0)
    return total_sigma_sq(m1, m1 * m1 + np.array([_exact_var(c) for c in u.T]))


def _exact_var(v: np.ndarray) -> float:
    # a constant column has variance exactly 0, not a rounding residue
    return 0.0 if np.all(v == v[0]) else float(np.var(v, ddof=1))


def sigma_hat(sample: MixedSample, wp: WeightParams, mode: str = "two_vector") -> float:
    """Square root of :func:`sigma_hat_sq`."""
    return math.sqrt(sigma_hat_sq(sample, wp, mode))


# --- analytic oracles ----------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticMarginal:
    """Exponential (rate ``param``, mean ``1/param``) or Poisson (mean ``param``)."""

    family: str
    param: float

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in ("exponential", "poisson"):
            raise ValueError(f"unsupported analytic family {self.family!r}")
        if not self.param > 0:
            raise ValueError("parameter must be positive")
        object.__setattr__(self, "family", fam)

    @property
    def is_count(self) -> bool:
        return self.family == "poisson"

    def transform(self, z):
        """Laplace transform at ``z >= 0`` or PGF at ``z`` in [0, 1]."""
        z = np.asarray(z, dtype=float)
        if self.family == "exponential":
            return self.param / (self.param + z)
        return np.exp(self.param * (z - 1.0))

    def reciprocal_moment(self, shift: float, k: int) -> float:
        """``E[(V + shift)^(-k)]``; for Poisson ``shift`` already includes the +1."""
        if self.family == "exponential":
            lam = self.param
            val, _ = integrate.quad(
                lambda x: lam * math.exp(-lam * x) * (x + shift) ** (-k), 0, np.inf,
                epsabs=0, epsrel=1e-13, limit=200,
            )
            return val
        top = int(stats.poisson.isf(_POISSON_TAIL, self.param)) + 1
        j = np.arange(top + 1)
        return float(np.sum(stats.poisson.pmf(j, self.param) * (j + shift) ** (-float(k))))


def _as_list(m) -> list[AnalyticMarginal]:
    return [m] if isinstance(m, AnalyticMarginal) else list(m)


def _point_parts(p, r1, r2):
    if hasattr(p, "s"):
        s, t = p.s, p.t
    else:
        s, t = p
    s = np.atleast_2d(np.asarray(s, dtype=float))
    t = np.atleast_2d(np.asarray(t, dtype=float))
    if s.shape[-1] != r1 or t.shape[-1] != r2:
        raise ValueError("point dimensions do not match the marginals")
    return s, t


def cov_kernel(mx, my, p1, p2, mode: str = "two_vector"):
    """Covariance kernel of the limiting process under independence.

    ``mx`` and ``my`` are an :class:`AnalyticMarginal` or a sequence of them
    (mutually independent coordinates).  Points are ``TransformPoint`` objects
    or ``(s, t)`` pairs, optionally batched with leading dimension ``K``.
    """
    mode = normalize_mode(mode)
    mx, my = _as_list(mx), _as_list(my)
    if any(m.is_count for m in mx) or not all(m.is_count for m in my):
        raise ValueError("mx must be continuous (exponential) and my count (Poisson)")
    r1, r2 = len(mx), len(my)
    s1, t1 = _point_parts(p1, r1, r2)
    s2, t2 = _point_parts(p2, r1, r2)
    # A: transform of the pair combination; B: product of the two transforms
    A = np.column_stack(
        [m.transform(s1[:, j] + s2[:, j]) for j, m in enumerate(mx)]
        + [m.transform(t1[:, k] * t2[:, k]) for k, m in enumerate(my)]
    )
    B = np.column_stack(
        [m.transform(s1[:, j]) * m.transform(s2[:, j]) for j, m in enumerate(mx)]
        + [m.transform(t1[:, k]) * m.transform(t2[:, k]) for k, m in enumerate(my)]
    )
    if mode == "two_vector":
        vals = (np.prod(A[:, r1:], axis=1) - np.prod(B[:, r1:], axis=1)) * (
            np.prod(A[:, :r1], axis=1) - np.prod(B[:, :r1], axis=1)
        )
    else:
        r = r1 + r2
        prod_b = np.prod(B, axis=1)
        loo = np.column_stack([np.prod(np.delete(B, d, axis=1), axis=1) for d in range(r)])
        vals = np.prod(A, axis=1) + (r - 1) * prod_b - np.sum(A * loo, axis=1)
    batched = np.ndim(p1[0] if not hasattr(p1, "s") else p1.s) == 2
    return vals if batched else float(vals[0])


def sigma_sq_by_quadrature(
    mx, my, wp: WeightParams, mode: str = "two_vector", quad: QuadratureRule = QuadratureRule(m=33)
) -> float:
    """Quadruple weighted integral of :func:`cov_kernel` on a tensor grid."""
    mx, my = _as_list(mx), _as_list(my)
    r1, r2 = len(mx), len(my)
    wp.check(r1, r2)
    axes = weighted_axes(wp, quad)
    total = 0.0
    for pts, wts in tensor_chunks(axes + axes):
        d = r1 + r2
        p1 = (pts[:, :r1], pts[:, r1:d])
        p2 = (pts[:, d : d + r1], pts[:, d + r1 :])
        total += float(np.dot(cov_kernel(mx, my, p1, p2, mode), wts))
    return total


def analytic_sigma_sq(mx, my, wp: WeightParams, mode: str = "two_vector") -> float:
    """Closed-form variance from exact reciprocal moments of the margins."""
    mode = normalize_mode(mode)
    mx, my = _as_list(mx), _as_list(my)
    wp.check(len(mx), len(my))
    shifts = list(wp.a) + list(wp.b + 1.0)
    margs = mx + my
    m1 = np.array([m.reciprocal_moment(c, 1) for m, c in zip(margs, shifts)])
    m2 = np.array([m.reciprocal_moment(c, 2) for m, c in zip(margs, shifts)])
    if mode == "two_vector":
        r1 = len(mx)
        var_x = np.prod(m2[:r1]) - np.prod(m1[:r1]) ** 2
        var_y = np.prod(m2[r1:]) - np.prod(m1[r1:]) ** 2
        return float(var_x * var_y)
    return total_sigma_sq(m1, m2)

