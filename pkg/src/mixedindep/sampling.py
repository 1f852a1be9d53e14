"""Synthetic mixed-type data: marginal quantile transforms, bivariate copulas
and regular-vine composition.

Copula conventions
------------------
``h(u, v) = dC(u, v)/dv`` is the conditional distribution of the first
argument given the second and ``hinv(w, v)`` solves ``h(u, v) = w`` for
``u``.  All four families are exchangeable, so the same pair of functions
serves both conditioning directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .transforms import MixedSample

_U_EPS = np.finfo(float).eps
_BISECT_TOL = 1e-10


def _clip_open(u: np.ndarray) -> np.ndarray:
    """Keep uniforms strictly inside (0, 1)."""
    return np.clip(u, np.finfo(float).tiny, 1.0 - _U_EPS / 2)


# --- marginals -------------------------------------------------------------------------

_CONTINUOUS = {"exponential": 1, "gamma": 2}
_COUNT = {"poisson": 1, "negbinomial": 2, "binomial": 2}
_FAMILY_ALIASES = {
    "exp": "exponential", "e": "exponential", "exponential": "exponential",
    "gamma": "gamma", "ga": "gamma",
    "poisson": "poisson", "p": "poisson", "pois": "poisson",
    "negbinomial": "negbinomial", "nb": "negbinomial", "negative_binomial": "negbinomial",
    "binomial": "binomial", "b": "binomial", "binom": "binomial",
}


@dataclass(frozen=True)
class MarginalSpec:
    """A marginal distribution.

    Families and parameters:

    * ``exponential(rate)``, mean ``1/rate``
    * ``gamma(shape, rate)``, mean ``shape/rate``
    * ``poisson(mean)``
    * ``negbinomial(m, p)``, number of failures before the ``m``-th success,
      mean ``m(1 - p)/p``
    * ``binomial(N, p)``
    """

    family: str
    params: tuple

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ValueError(f"unknown marginal family {self.family!r}")
        params = tuple(float(p) for p in np.atleast_1d(self.params))
        want = {**_CONTINUOUS, **_COUNT}[fam]
        if len(params) != want:
            raise ValueError(f"{fam} takes {want} parameter(s), got {len(params)}")
        ok = {
            "exponential": lambda r: r > 0,
            "gamma": lambda a, r: a > 0 and r > 0,
            "poisson": lambda m: m > 0,
            "negbinomial": lambda m, p: m > 0 and 0 < p <= 1,
            "binomial": lambda N, p: N >= 1 and float(N).is_integer() and 0 <= p <= 1,
        }[fam](*params)
        if not ok or not all(math.isfinite(p) for p in params):
            raise ValueError(f"invalid parameters {params} for {fam}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", params)

    @property
    def role(self) -> str:
        return "continuous" if self.family in _CONTINUOUS else "count"

    def _dist(self):
        p = self.params
        if self.family == "poisson":
            return stats.poisson(p[0])
        if self.family == "negbinomial":
            return stats.nbinom(p[0], p[1])
        return stats.binom(int(p[0]), p[1])

    def quantile(self, u):
        """Inverse CDF; for count families the smallest k with CDF(k) >= u."""
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)) or np.any(np.isnan(u)):
            raise ValueError("u must lie strictly inside (0, 1)")
        if self.family == "exponential":
            return -np.log1p(-u) / self.params[0]
        if self.family == "gamma":
            shape, rate = self.params
            return special.gammaincinv(shape, u) / rate
        return _count_quantile(self, u)

    def __str__(self) -> str:
        short = {"exponential": "E", "gamma": "gamma", "poisson": "P", "negbinomial": "NB", "binomial": "B"}
        return f"{short[self.family]}({','.join(f'{p:g}' for p in self.params)})"


_TABLE_CACHE: dict = {}


def _count_table(spec: MarginalSpec) -> np.ndarray:
    tab = _TABLE_CACHE.get(spec)
    if tab is None:
        dist = spec._dist()
        mean, var = dist.stats()
        top = int(mean + 10.0 * math.sqrt(var)) + 10
        while dist.sf(top) > 1e-17:
            top *= 2
        tab = dist.cdf(np.arange(top + 1))
        tab.setflags(write=False)
        _TABLE_CACHE[spec] = tab
    return tab


def _count_quantile(spec: MarginalSpec, u: np.ndarray) -> np.ndarray:
    tab = _count_table(spec)
    k = np.searchsorted(tab, u, side="left")
    over = k >= tab.size
    if np.any(over):
        k = k.copy()
        k[over] = spec._dist().ppf(u[over]).astype(np.int64)
    return k.astype(np.int64)


def marginal_quantile(spec: MarginalSpec, u):
    return spec.quantile(u)


# --- bivariate copulas -----------------------------------------------------------------

_COPULA_ALIASES = {
    "gaussian": "gaussian", "ga": "gaussian", "normal": "gaussian",
    "clayton": "clayton", "cl": "clayton",
    "gumbel": "gumbel", "gu": "gumbel",
    "joe": "joe",
    "independence": "independence", "ind": "independence", "indep": "independence",
}


def _bisect_inverse(h, w, v, tol=_BISECT_TOL):
    """Solve ``h(u, v) = w`` for u by vectorized bisection (h increasing in u)."""
    lo = np.zeros_like(w)
    hi = np.ones_like(w)
    for _ in range(int(math.ceil(math.log2(1.0 / tol))) + 1):
        mid = 0.5 * (lo + hi)
        below = h(_clip_open(mid), v) < w
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return _clip_open(0.5 * (lo + hi))


@dataclass(frozen=True)
class CopulaModel:
    """A bivariate copula family with parameter ``theta``.

    Gaussian: ``theta`` in (-1, 1); Clayton: ``theta > 0``; Gumbel and Joe:
    ``theta >= 1`` (``theta = 1`` is the independence copula).
    """

    family: str
    theta: float = 0.0

    def __post_init__(self):
        fam = _COPULA_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ValueError(f"unknown copula family {self.family!r}")
        th = float(self.theta)
        valid = {
            "gaussian": -1 < th < 1,
            "clayton": th > 0,
            "gumbel": th >= 1,
            "joe": th >= 1,
            "independence": True,
        }[fam]
        if not valid or not math.isfinite(th):
            raise ValueError(f"theta={th} is outside the range of the {fam} copula")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "theta", th)

    @property
    def is_independence(self) -> bool:
        return (
            self.family == "independence"
            or (self.family in ("gumbel", "joe") and self.theta == 1.0)
            or (self.family == "gaussian" and self.theta == 0.0)
        )

    def kendall_tau(self) -> float:
        th = self.theta
        if self.is_independence:
            return 0.0
        if self.family == "gaussian":
            return 2.0 / math.pi * math.asin(th)
        if self.family == "clayton":
            return th / (th + 2.0)
        if self.family == "gumbel":
            return 1.0 - 1.0 / th
        k = np.arange(1, 200001, dtype=float)
        return float(1.0 - 4.0 * np.sum(1.0 / (k * (th * k + 2.0) * (th * (k - 1.0) + 2.0))))

    # sampling ---------------------------------------------------------------
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` i.i.d. pairs, shape ``(n, 2)``, strictly inside (0, 1)."""
        th = self.theta
        if self.is_independence:
            return _clip_open(rng.random((n, 2)))
        if self.family == "gaussian":
            z = rng.standard_normal((n, 2))
            z[:, 1] = th * z[:, 0] + math.sqrt(1.0 - th * th) * z[:, 1]
            return _clip_open(special.ndtr(z))
        e = rng.standard_exponential((n, 2))
        if self.family == "clayton":
            v = rng.gamma(1.0 / th, size=n)
            return _clip_open(np.power(1.0 + e / v[:, None], -1.0 / th))
        if self.family == "gumbel":
            v = _positive_stable(1.0 / th, n, rng)
            return _clip_open(np.exp(-np.power(e / v[:, None], 1.0 / th)))
        v = _sibuya(1.0 / th, n, rng)
        return _clip_open(1.0 - np.power(-np.expm1(-e / v[:, None]), 1.0 / th))

    # conditional distributions ---------------------------------------------
    def h(self, u, v):
        """``P(U <= u | V = v)``."""
        u = _clip_open(np.asarray(u, dtype=float))
        v = _clip_open(np.asarray(v, dtype=float))
        th = self.theta
        if self.is_independence:
            return u
        if self.family == "gaussian":
            return special.ndtr((special.ndtri(u) - th * special.ndtri(v)) / math.sqrt(1.0 - th * th))
        if self.family == "clayton":
            base = np.power(u, -th) + np.power(v, -th) - 1.0
            return np.power(v, -th - 1.0) * np.power(base, -1.0 / th - 1.0)
        if self.family == "gumbel":
            lu, lv = -np.log(u), -np.log(v)
            a = np.power(lu, th) + np.power(lv, th)
            c = np.exp(-np.power(a, 1.0 / th))
            return c / v * np.power(lv, th - 1.0) * np.power(a, 1.0 / th - 1.0)
        ub = np.power(1.0 - u, th)
        vb = np.power(1.0 - v, th)
        return np.power(ub + vb - ub * vb, 1.0 / th - 1.0) * np.power(1.0 - v, th - 1.0) * (1.0 - ub)

    def hinv(self, w, v):
        """Inverse of :meth:`h` in its first argument."""
        w = _clip_open(np.asarray(w, dtype=float))
        v = _clip_open(np.asarray(v, dtype=float))
        th = self.theta
        if self.is_independence:
            return w
        if self.family == "gaussian":
            return _clip_open(special.ndtr(special.ndtri(w) * math.sqrt(1.0 - th * th) + th * special.ndtri(v)))
        if self.family == "clayton":
            inner = np.power(w * np.power(v, th + 1.0), -th / (th + 1.0)) + 1.0 - np.power(v, -th)
            return _clip_open(np.power(inner, -1.0 / th))
        w, v = np.broadcast_arrays(w, v)
        return _bisect_inverse(self.h, w, v)

    def __str__(self) -> str:
        short = {"gaussian": "Ga", "clayton": "Cl", "gumbel": "Gu", "joe": "Joe", "independence": "Ind"}
        return short[self.family] if self.family == "independence" else f"{short[self.family]}({self.theta:g})"


def _positive_stable(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variates with Laplace transform ``exp(-x**alpha)`` (Kanter)."""
    theta = rng.uniform(0.0, math.pi, n)
    w = rng.standard_exponential(n)
    a = np.sin(alpha * theta) / np.power(np.sin(theta), 1.0 / alpha)
    b = np.power(np.sin((1.0 - alpha) * theta) / w, (1.0 - alpha) / alpha)
    return a * b


def _sibuya(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sibuya(alpha) variates as a Beta(alpha, 1 - alpha) mixture of geometrics on {1, 2, ...}."""
    p = rng.beta(alpha, 1.0 - alpha, n)
    u = rng.random(n)
    # P(V > k | p) = (1 - p)^k; computed in floats since V can be huge
    with np.errstate(divide="ignore"):
        v = np.ceil(np.log1p(-u) / np.log1p(-p))
    return np.maximum(v, 1.0)


def copula_pair_sample(model: CopulaModel, n: int, rng: np.random.Generator) -> np.ndarray:
    return model.sample(n, rng)


# --- vines -----------------------------------------------------------------------------


@dataclass(frozen=True)
class VineEdge:
    """Pair copula of variables ``a`` and ``b`` given the set ``cond``."""

    a: int
    b: int
    cond: frozenset
    copula: CopulaModel

    @property
    def full(self) -> frozenset:
        return self.cond | {self.a, self.b}


@dataclass
class VineSpec:
    """A regular vine on ``d`` variables given as a list of trees of edges.

    Tree ``k`` (0-based) has ``d - 1 - k`` edges with conditioning sets of
    size ``k``.  Construction validates the tree and proximity conditions and
    precomputes a sampling order.
    """

    d: int
    trees: list
    _plan: list = field(init=False, repr=False)
    _lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.trees = [[e for e in tree] for tree in self.trees]
        self._validate()
        self._lookup = {}
        for tree in self.trees:
            for e in tree:
                self._lookup[(e.a, e.cond | {e.b})] = (e, e.b)
                self._lookup[(e.b, e.cond | {e.a})] = (e, e.a)
        self._plan = self._sampling_plan()

    def edges(self):
        for tree in self.trees:
            yield from tree

    def _validate(self) -> None:
        d = self.d
        if d < 2:
            raise ValueError("a vine needs at least two variables")
        if len(self.trees) != d - 1:
            raise ValueError(f"a vine on {d} variables has {d - 1} trees, got {len(self.trees)}")
        prev = None
        for k, tree in enumerate(self.trees):
            if len(tree) != d - 1 - k:
                raise ValueError(f"tree {k + 1} must have {d - 1 - k} edges, got {len(tree)}")
            nodes = list(range(d)) if k == 0 else list(range(len(prev)))
            parent = {i: i for i in nodes}

            def find(i):
                while parent[i] != i:
                    parent[i] = parent[parent[i]]
                    i = parent[i]
                return i

            for e in tree:
                if e.a == e.b or e.a in e.cond or e.b in e.cond or len(e.cond) != k:
                    raise ValueError(f"malformed edge {e.a},{e.b}|{sorted(e.cond)} in tree {k + 1}")
                if not all(0 <= v < d for v in e.full):
                    raise ValueError("edge refers to a variable outside the vine")
                if k == 0:
                    i, j = e.a, e.b
                else:
                    # proximity: both parents must be edges of the previous tree
                    try:
                        i = next(p for p, f in enumerate(prev) if f.full == e.cond | {e.a})
                        j = next(p for p, f in enumerate(prev) if f.full == e.cond | {e.b})
                    except StopIteration:
                        raise ValueError(
                            f"edge {e.a},{e.b}|{sorted(e.cond)} in tree {k + 1} violates proximity"
                        ) from None
                ri, rj = find(i), find(j)
                if ri == rj:
                    raise ValueError(f"tree {k + 1} contains a cycle")
                parent[ri] = rj
            prev = tree

    def _sampling_plan(self):
        trees = [list(t) for t in self.trees]
        peeled = []
        while len(trees) > 0:
            top = trees[-1][0]
            for var in (top.a, top.b):
                column = _column(trees, var)
                if column is not None:
                    break
            else:
                raise ValueError("vine admits no sampling order (not a regular vine)")
            for k, (edge, _, _) in enumerate(column):
                trees[k].remove(edge)
            trees.pop()
            peeled.append((var, [(other, cond, edge.copula) for edge, other, cond in column]))
        remaining = set(range(self.d)) - {v for v, _ in peeled}
        (first,) = remaining
        return [(first, [])] + peeled[::-1]

    @property
    def order(self) -> list[int]:
        return [v for v, _ in self._plan]


def _column(trees, var):
    """Edges ``{var, c_k} | D_k``, one per tree, with ``D_{k+1} = D_k + {c_k}``."""
    out = []
    cond = frozenset()
    for tree in trees:
        hits = [e for e in tree if var in (e.a, e.b) and e.cond == cond]
        if len(hits) != 1:
            return None
        e = hits[0]
        other = e.b if e.a == var else e.a
        out.append((e, other, cond))
        cond = cond | {other}
    return out


def vine_sample(spec: VineSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` rows from the vine copula by inverse Rosenblatt transformation."""
    w = _clip_open(rng.random((n, spec.d)))
    u = np.empty((n, spec.d))
    memo: dict = {}

    def cond_cdf(x, cond):
        key = (x, cond)
        if key not in memo:
            if not cond:
                memo[key] = u[:, x]
            else:
                edge, y = spec._lookup[(x, cond)]
                rest = cond - {y}
                memo[key] = edge.copula.h(cond_cdf(x, rest), cond_cdf(y, rest))
        return memo[key]

    for var, column in spec._plan:
        val = w[:, var]
        # walk down from the full conditioning set to the unconditional uniform
        for other, cond, cop in reversed(column):
            memo[(var, cond | {other})] = val
            val = cop.hinv(val, cond_cdf(other, cond))
        u[:, var] = val
        memo[(var, frozenset())] = u[:, var]
    return u


def d_vine(d: int, copulas) -> VineSpec:
    """D-vine on the path ``0 - 1 - ... - (d-1)``.

    ``copulas(k, i)`` returns the copula of edge ``(i, i + k + 1)`` in tree ``k``.
    """
    trees = []
    for k in range(d - 1):
        tree = []
        for i in range(d - 1 - k):
            j = i + k + 1
            tree.append(VineEdge(i, j, frozenset(range(i + 1, j)), copulas(k, i)))
        trees.append(tree)
    return VineSpec(d, trees)


def independence_vine(d: int) -> VineSpec:
    ind = CopulaModel("independence")
    return d_vine(d, lambda k, i: ind)


def default_vine(
    r1: int,
    r2: int,
    family: str,
    theta1: Optional[float] = None,
    theta2: Optional[float] = None,
    theta3: Optional[float] = None,
) -> VineSpec:
    """Stand-in vine for the multivariate designs.

    Variables are ordered continuous block first.  Tree 1 is the path
    ``X_1 - ... - X_r1 - Y_1 - ... - Y_r2``: same-type edges get ``theta1``
    (independence when ``theta1`` is ``None`` or 0) and the single cross edge
    gets ``theta2``.  Deeper trees use ``theta3`` if given, else ``theta2``.
    """
    d = r1 + r2
    if family.lower() in ("independence", "ind"):
        return independence_vine(d)
    if theta2 is None:
        raise ValueError("theta2 is required for a dependent design")
    ind = CopulaModel("independence")

    def make(th):
        if th is None or th == 0:
            return ind
        return CopulaModel(family, th)

    deep = theta3 if theta3 is not None else theta2

    def pick(k, i):
        if k == 0:
            return make(theta2) if i == r1 - 1 else make(theta1)
        return make(deep)

    return d_vine(d, pick)


def vine_from_records(d: int, records: Sequence[dict]) -> VineSpec:
    """Build a vine from records ``{tree, a, b, cond, family, theta}`` (1-based tree)."""
    trees = [[] for _ in range(d - 1)]
    for r in records:
        cop = CopulaModel(r.get("family", "independence"), r.get("theta", 0.0))
        trees[int(r["tree"]) - 1].append(VineEdge(int(r["a"]), int(r["b"]), frozenset(r.get("cond", [])), cop))
    return VineSpec(d, trees)


# --- datasets ----------------------------------------------------------------------------


def generate_dataset(
    marginals: Sequence[MarginalSpec], vine: VineSpec, n: int, rng: np.random.Generator
) -> MixedSample:
    """Vine uniforms pushed through the marginal quantiles.

    Column ``j`` of the vine feeds ``marginals[j]``; continuous columns form
    the x block and count columns the y block, each in their original order.
    """
    if len(marginals) != vine.d:
        raise ValueError(f"{len(marginals)} marginals for a vine of dimension {vine.d}")
    cont = [j for j, m in enumerate(marginals) if m.role == "continuous"]
    count = [j for j, m in enumerate(marginals) if m.role == "count"]
    if not cont or not count:
        raise ValueError("need at least one continuous and one count marginal")
    u = vine_sample(vine, n, rng)
    x = np.column_stack([marginals[j].quantile(u[:, j]) for j in cont])
    y = np.column_stack([marginals[j].quantile(u[:, j]) for j in count])
    # a continuous draw can underflow to 0 only for u ~ 1e-308; keep X strictly positive
    x = np.maximum(x, np.finfo(float).tiny)
    return MixedSample(x, y)
