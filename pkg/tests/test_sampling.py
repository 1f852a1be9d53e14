import math

import numpy as np
import pytest
from scipy import stats

from mixedindep.sampling import (
    CopulaModel,
    MarginalSpec,
    VineEdge,
    VineSpec,
    copula_pair_sample,
    d_vine,
    default_vine,
    generate_dataset,
    independence_vine,
    marginal_quantile,
    vine_from_records,
    vine_sample,
)
from mixedindep.transforms import MixedSample


def _tau(u, v):
    return stats.kendalltau(u, v)[0]


def test_exponential_quantile():
    assert marginal_quantile(MarginalSpec("exponential", 1.5), 1 - math.exp(-1.5)) == pytest.approx(1.0, rel=1e-14)


def test_poisson_quantile():
    # P(<=1) = 3 e^-2 ~ 0.406 < 0.5 <= P(<=2) ~ 0.677
    assert marginal_quantile(MarginalSpec("poisson", 2.0), 0.5) == 2
    assert marginal_quantile(MarginalSpec("poisson", 2.0), 0.4) == 1


def test_count_quantile_is_smallest_k():
    rng = np.random.default_rng(0)
    for spec, dist in [
        (MarginalSpec("poisson", 2.0), stats.poisson(2.0)),
        (MarginalSpec("nb", (2, 0.4)), stats.nbinom(2, 0.4)),
        (MarginalSpec("binomial", (10, 0.4)), stats.binom(10, 0.4)),
    ]:
        u = rng.random(2000)
        k = spec.quantile(u)
        assert np.all(dist.cdf(k) >= u)
        assert np.all((k == 0) | (dist.cdf(k - 1) < u))


def test_binomial_quantile_monotone_step():
    spec = MarginalSpec("binomial", (10, 0.4))
    u = np.linspace(1e-9, 1 - 1e-9, 5001)
    k = spec.quantile(u)
    assert np.all(np.diff(k) >= 0)
    assert set(np.unique(k)) <= set(range(11))


def test_gamma_quantile_accuracy():
    spec = MarginalSpec("gamma", (5, 1))
    u = np.array([1e-8, 0.01, 0.3, 0.5, 0.9, 0.999999])
    x = spec.quantile(u)
    np.testing.assert_allclose(stats.gamma(5, scale=1).cdf(x), u, rtol=1e-12)
    # rate parametrization: mean shape/rate
    assert MarginalSpec("gamma", (5, 2)).quantile(0.5) == pytest.approx(stats.gamma(5, scale=0.5).ppf(0.5), rel=1e-12)


def test_negative_binomial_mean():
    spec = MarginalSpec("nb", (2, 0.4))
    k = spec.quantile(np.random.default_rng(1).random(200000))
    assert k.mean() == pytest.approx(2 * 0.6 / 0.4, rel=0.02)


def test_quantile_domain():
    with pytest.raises(ValueError):
        marginal_quantile(MarginalSpec("poisson", 2.0), 1.0)
    with pytest.raises(ValueError):
        marginal_quantile(MarginalSpec("exponential", 1.0), 0.0)


def test_marginal_validation():
    with pytest.raises(ValueError):
        MarginalSpec("poisson", -1.0)
    with pytest.raises(ValueError):
        MarginalSpec("binomial", (2.5, 0.3))
    with pytest.raises(ValueError):
        MarginalSpec("gamma", 1.0)
    with pytest.raises(ValueError):
        MarginalSpec("weibull", 1.0)
    assert MarginalSpec("E", 1.5).role == "continuous"
    assert MarginalSpec("NB", (2, 0.4)).role == "count"


@pytest.mark.parametrize(
    "model, tol",
    [
        (CopulaModel("gaussian", 0.0), 0.01),
        (CopulaModel("gaussian", 0.55), 0.015),
        (CopulaModel("clayton", 0.5), 0.015),
        (CopulaModel("gumbel", 1.5), 0.015),
        (CopulaModel("joe", 2.0), 0.015),
    ],
)
def test_kendall_tau(model, tol):
    uv = copula_pair_sample(model, 50000, np.random.default_rng(2))
    assert np.all((uv > 0) & (uv < 1))
    assert abs(_tau(uv[:, 0], uv[:, 1]) - model.kendall_tau()) < tol


def test_closed_form_taus():
    assert CopulaModel("clayton", 0.5).kendall_tau() == pytest.approx(0.2)
    assert CopulaModel("gumbel", 1.5).kendall_tau() == pytest.approx(1.0 / 3.0)
    assert CopulaModel("gaussian", 0.5).kendall_tau() == pytest.approx(1.0 / 3.0)
    # Joe at theta = 2 is the limit of 1 + 2/(2 - th) (psi(2) - psi(2/th + 1)), i.e. 1 - psi'(2)
    from scipy import special

    th = 2.0
    joe = 1.0 - float(special.polygamma(1, 2))
    assert CopulaModel("joe", th).kendall_tau() == pytest.approx(joe, abs=1e-5)


def test_independence_members():
    assert CopulaModel("gumbel", 1.0).is_independence
    assert CopulaModel("joe", 1.0).is_independence
    assert CopulaModel("gaussian", 0.0).is_independence
    assert not CopulaModel("clayton", 0.1).is_independence


def test_copula_validation():
    for fam, th in [("gaussian", 1.0), ("clayton", 0.0), ("gumbel", 0.9), ("joe", 0.5), ("frank", 1.0)]:
        with pytest.raises(ValueError):
            CopulaModel(fam, th)


@pytest.mark.parametrize(
    "model",
    [CopulaModel("gaussian", -0.4), CopulaModel("clayton", 2.0), CopulaModel("gumbel", 2.5), CopulaModel("joe", 3.0)],
)
def test_h_inverse_roundtrip(model):
    rng = np.random.default_rng(3)
    u, v = rng.uniform(0.001, 0.999, (2, 500))
    w = model.h(u, v)
    assert np.all((w >= 0) & (w <= 1))
    np.testing.assert_allclose(model.hinv(w, v), u, atol=1e-8)


@pytest.mark.parametrize(
    "model", [CopulaModel("clayton", 1.5), CopulaModel("gumbel", 1.7), CopulaModel("joe", 2.2)]
)
def test_h_is_conditional_cdf(model):
    # h(u, v) = dC(u, v)/dv, checked against a finite difference of the copula CDF
    rng = np.random.default_rng(4)
    uv = model.sample(400000, rng)
    u0, v0, dv = 0.4, 0.6, 0.02
    band = np.abs(uv[:, 1] - v0) < dv
    emp = np.mean(uv[band, 0] <= u0)
    assert abs(emp - float(model.h(u0, v0))) < 0.02


def test_vine_independence_columns():
    u = vine_sample(independence_vine(4), 50000, np.random.default_rng(5))
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(_tau(u[:, i], u[:, j])) < 0.01


def test_two_dim_vine_matches_pair_sampler():
    model = CopulaModel("clayton", 0.5)
    vine = d_vine(2, lambda k, i: model)
    a = vine_sample(vine, 20000, np.random.default_rng(6))
    b = copula_pair_sample(model, 20000, np.random.default_rng(7))
    for col in (0, 1):
        assert stats.ks_2samp(a[:, col], b[:, col]).pvalue > 0.01
    assert stats.ks_2samp(a[:, 0] * a[:, 1], b[:, 0] * b[:, 1]).pvalue > 0.01


def test_d_vine_gaussian_pair_tau():
    th1, th2 = 0.6, 0.3
    ind = CopulaModel("independence")
    cops = {(0, 0): CopulaModel("gaussian", th1), (0, 1): CopulaModel("gaussian", th2), (1, 0): ind}
    u = vine_sample(d_vine(3, lambda k, i: cops[(k, i)]), 50000, np.random.default_rng(8))
    assert abs(_tau(u[:, 0], u[:, 1]) - 2 / math.pi * math.asin(th1)) < 0.015
    assert abs(_tau(u[:, 1], u[:, 2]) - 2 / math.pi * math.asin(th2)) < 0.015
    # conditional independence in tree 2 makes (0, 2) a Gaussian pair with rho = th1 * th2
    assert abs(_tau(u[:, 0], u[:, 2]) - 2 / math.pi * math.asin(th1 * th2)) < 0.015


def test_c_vine_sampling():
    # star tree around variable 0, then a star around 1 given 0
    g = CopulaModel("gaussian", 0.5)
    records = [
        {"tree": 1, "a": 0, "b": 1, "family": "gaussian", "theta": 0.5},
        {"tree": 1, "a": 0, "b": 2, "family": "gaussian", "theta": 0.5},
        {"tree": 1, "a": 0, "b": 3, "family": "gaussian", "theta": 0.5},
        {"tree": 2, "a": 1, "b": 2, "cond": [0], "family": "independence"},
        {"tree": 2, "a": 1, "b": 3, "cond": [0], "family": "independence"},
        {"tree": 3, "a": 2, "b": 3, "cond": [0, 1], "family": "independence"},
    ]
    vine = vine_from_records(4, records)
    u = vine_sample(vine, 40000, np.random.default_rng(9))
    rho = np.corrcoef(stats.norm.ppf(u), rowvar=False)
    assert abs(rho[0, 1] - 0.5) < 0.02
    assert abs(rho[1, 2] - 0.25) < 0.02
    assert g.kendall_tau() > 0


def test_vine_validation():
    ind = CopulaModel("independence")
    with pytest.raises(ValueError):
        VineSpec(3, [[VineEdge(0, 1, frozenset(), ind)], [VineEdge(0, 2, frozenset({1}), ind)]])
    with pytest.raises(ValueError):
        # a cycle in tree 1
        VineSpec(3, [[VineEdge(0, 1, frozenset(), ind), VineEdge(1, 0, frozenset(), ind)], [VineEdge(0, 2, frozenset({1}), ind)]])
    with pytest.raises(ValueError):
        # proximity: (0, 3 | 1) needs edges {0, 1} and {1, 3} in tree 1
        VineSpec(
            4,
            [
                [VineEdge(0, 1, frozenset(), ind), VineEdge(1, 2, frozenset(), ind), VineEdge(2, 3, frozenset(), ind)],
                [VineEdge(0, 3, frozenset({1}), ind), VineEdge(1, 3, frozenset({2}), ind)],
                [VineEdge(0, 2, frozenset({1, 3}), ind)],
            ],
        )


def test_default_vine_structure():
    v = default_vine(2, 2, "clayton", 0.75, 0.5, 0.3)
    tree1 = {(e.a, e.b): e.copula for e in v.trees[0]}
    assert tree1[(0, 1)].theta == 0.75 and tree1[(2, 3)].theta == 0.75
    assert tree1[(1, 2)].theta == 0.5
    assert all(e.copula.theta == 0.3 for t in v.trees[1:] for e in t)
    v0 = default_vine(1, 2, "gaussian", 0, 0.35)
    assert v0.trees[0][1].copula.is_independence
    assert all(e.copula.theta == 0.35 for e in v0.trees[1])
    with pytest.raises(ValueError):
        default_vine(1, 1, "gumbel", None, None)


def test_generate_dataset_invariants_and_determinism():
    margs = [MarginalSpec("poisson", 2.0), MarginalSpec("exponential", 1.5), MarginalSpec("binomial", (10, 0.4))]
    vine = default_vine(1, 2, "joe", None, 2.0)
    s1 = generate_dataset(margs, vine, 300, np.random.default_rng(10))
    s2 = generate_dataset(margs, vine, 300, np.random.default_rng(10))
    assert isinstance(s1, MixedSample)
    assert s1.r1 == 1 and s1.r2 == 2
    assert np.all(s1.x > 0) and np.all(s1.y >= 0) and s1.y.dtype.kind == "i"
    np.testing.assert_array_equal(s1.x, s2.x)
    np.testing.assert_array_equal(s1.y, s2.y)
    with pytest.raises(ValueError):
        generate_dataset(margs[:2], vine, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        generate_dataset([MarginalSpec("poisson", 1.0)] * 3, vine, 10, np.random.default_rng(0))


def test_gaussian_design_positive_association():
    margs = [MarginalSpec("exponential", 1.5), MarginalSpec("poisson", 2.0)]
    vine = default_vine(1, 1, "gaussian", None, 0.55)
    rng = np.random.default_rng(11)
    pos = 0
    for _ in range(200):
        s = generate_dataset(margs, vine, 500, rng)
        pos += np.corrcoef(s.x[:, 0], s.y[:, 0])[0, 1] > 0
    assert pos / 200 > 0.99
