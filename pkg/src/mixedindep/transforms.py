"""Empirical Laplace/PGF transforms of mixed continuous-count samples.

Every function here is a pure function of its inputs.  Points may be passed
either as a single :class:`TransformPoint` or as batched arrays of shape
``(K, r1)`` and ``(K, r2)``, in which case a length-``K`` array is returned.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Mode = Literal["two_vector", "total"]

_MODE_ALIASES = {
    "two_vector": "two_vector",
    "two-vector": "two_vector",
    "vector": "two_vector",
    "total": "total",
}


def normalize_mode(mode: str) -> Mode:
    try:
        return _MODE_ALIASES[str(mode).lower()]  # type: ignore[return-value]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; expected 'two_vector' or 'total'") from None


def _as_matrix(values, name: str, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a vector or an (n, r) matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class MixedSample:
    """n rows of a positive continuous block ``x`` and a count block ``y``.

    ``x`` has shape ``(n, r1)`` with strictly positive entries and ``y`` has
    shape ``(n, r2)`` with non-negative integers.  One-dimensional inputs are
    treated as a single column.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_matrix(self.x, "x", float)
        y_raw = np.asarray(self.y)
        if y_raw.dtype.kind == "f":
            if not np.all(np.isfinite(y_raw)) or np.any(y_raw != np.round(y_raw)):
                raise ValueError("count block y must hold integers")
        y = _as_matrix(y_raw, "y", np.int64)
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise ValueError("sample needs n >= 1 rows and at least one column per block")
        if not np.all(np.isfinite(x)) or np.any(x <= 0):
            raise ValueError("continuous block x must be strictly positive and finite")
        if np.any(y < 0):
            raise ValueError("count block y must be non-negative")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def r1(self) -> int:
        return self.x.shape[1]

    @property
    def r2(self) -> int:
        return self.y.shape[1]

    def columns(self) -> list[np.ndarray]:
        """All ``r1 + r2`` columns, continuous block first."""
        return [self.x[:, j] for j in range(self.r1)] + [self.y[:, k] for k in range(self.r2)]

    def take_rows(self, index) -> "MixedSample":
        return MixedSample(self.x[index], self.y[index])


@dataclass(frozen=True, eq=False)
class TransformPoint:
    s: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if np.any(s < 0):
            raise ValueError("s components must be >= 0")
        if np.any((t < 0) | (t > 1)):
            raise ValueError("t components must lie in [0, 1]")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)


@dataclass(frozen=True, eq=False)
class WeightParams:
    """Tuning vectors of the weight ``w(s, t) = exp(-a.s) * prod t_k**b_k``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.ndim != 1 or b.ndim != 1:
            raise ValueError("a and b must be vectors")
        if not (np.all(a > 0) and np.all(b > 0)):
            raise ValueError("every component of a and b must be strictly positive")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("a and b must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def broadcast(cls, a, b, r1: int, r2: int) -> "WeightParams":
        """Expand scalar (or length-1) tuning values to the block sizes."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.size == 1:
            a = np.repeat(a, r1)
        if b.size == 1:
            b = np.repeat(b, r2)
        wp = cls(a, b)
        wp.check(r1, r2)
        return wp

    def check(self, r1: int, r2: int) -> None:
        if self.a.size != r1 or self.b.size != r2:
            raise ValueError(
                f"weight dimensions (a: {self.a.size}, b: {self.b.size}) do not match "
                f"sample dimensions (r1: {r1}, r2: {r2})"
            )


def _point_arrays(sample: MixedSample, p):
    """Return ``(s, t, batched)`` with s of shape (K, r1) and t of shape (K, r2)."""
    if isinstance(p, TransformPoint):
        s, t = p.s, p.t
    else:
        s, t = p
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
    batched = s.ndim == 2
    s2 = np.atleast_2d(s)
    t2 = np.atleast_2d(t)
    if s2.shape[-1] != sample.r1 or t2.shape[-1] != sample.r2:
        raise ValueError(
            f"point dimensions ({s2.shape[-1]}, {t2.shape[-1]}) do not match "
            f"sample dimensions ({sample.r1}, {sample.r2})"
        )
    if s2.shape[0] != t2.shape[0]:
        raise ValueError("s and t batches differ in length")
    return s2, t2, batched


def _pgf_factors(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    # prod_k t_k**Y_ik with 0**0 == 1; t: (K, r2), y: (n, r2) -> (K, n)
    return np.prod(np.power(t[:, None, :], y[None, :, :]), axis=2)


def _laplace_factors(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.exp(-(s @ x.T))


def _finish(values: np.ndarray, batched: bool):
    return values if batched else float(values[0])


def eval_psi_n(sample: MixedSample, p):
    """Empirical joint transform ``(1/n) sum_i exp(-s.X_i) prod_k t_k**Y_ik``."""
    s, t, batched = _point_arrays(sample, p)
    vals = np.mean(_laplace_factors(s, sample.x) * _pgf_factors(t, sample.y), axis=1)
    return _finish(vals, batched)


def eval_marginal_product(sample: MixedSample, p, mode: str = "two_vector"):
    """Product of empirical marginal transforms.

    ``two_vector`` gives ``L_n(s) G_n(t)`` with block-joint marginals; ``total``
    gives the product of all ``r1 + r2`` univariate empirical transforms.
    """
    mode = normalize_mode(mode)
    s, t, batched = _point_arrays(sample, p)
    if mode == "two_vector":
        vals = np.mean(_laplace_factors(s, sample.x), axis=1) * np.mean(_pgf_factors(t, sample.y), axis=1)
    else:
        lap = np.mean(np.exp(-s[:, None, :] * sample.x[None, :, :]), axis=1)
        pgf = np.mean(np.power(t[:, None, :], sample.y[None, :, :]), axis=1)
        vals = np.prod(lap, axis=1) * np.prod(pgf, axis=1)
    return _finish(vals, batched)


def eval_xi_n(sample: MixedSample, p, mode: str = "two_vector"):
    """Empirical process: joint transform minus the product of marginals."""
    mode = normalize_mode(mode)
    s, t, batched = _point_arrays(sample, p)
    lap = _laplace_factors(s, sample.x)
    pgf = _pgf_factors(t, sample.y)
    joint = np.mean(lap * pgf, axis=1)
    if mode == "two_vector":
        marg = np.mean(lap, axis=1) * np.mean(pgf, axis=1)
    else:
        marg = eval_marginal_product(sample, (s, t), mode)
    return _finish(joint - marg, batched)


def eval_weight(wp: WeightParams, p):
    """``exp(-sum a_j s_j) * prod t_k**b_k``."""
    if isinstance(p, TransformPoint):
        s, t = p.s, p.t
    else:
        s, t = (np.asarray(v, dtype=float) for v in p)
    batched = np.ndim(s) == 2
    s2, t2 = np.atleast_2d(s), np.atleast_2d(t)
    if s2.shape[-1] != wp.a.size or t2.shape[-1] != wp.b.size:
        raise ValueError("weight and point dimensions do not match")
    vals = np.exp(-(s2 @ wp.a)) * np.prod(np.power(t2, wp.b), axis=1)
    return _finish(vals, batched)


def reciprocal_columns(sample: MixedSample, wp: WeightParams) -> np.ndarray:
    """Per-coordinate integrals ``1/(X_ij + a_j)`` and ``1/(Y_ik + b_k + 1)``.

    These are the weighted integrals of one row's transform factor along one
    axis; every closed form for I and its variance is built from them.
    Returns an ``(n, r1 + r2)`` matrix, continuous block first.
    """
    wp.check(sample.r1, sample.r2)
    return np.hstack([1.0 / (sample.x + wp.a), 1.0 / (sample.y + wp.b + 1.0)])
