"""Acceptance criteria, each reported as one PASS/FAIL line.

Seeds are fixed up front.  Each check states its reference value and
tolerance.
"""
import json
import math
import time

import numpy as np
import pytest
from scipy import stats

import conftest
from conftest import random_sample, random_weight
from mixedindep import bundled_path
from mixedindep.cli import main, read_mixed_csv
from mixedindep.inference import (
    SimulationConfig,
    mc_null_quantiles,
    null_st_i_values,
    permutation_test,
    warp_speed_power,
)
from mixedindep.quadrature import oracle_statistic
from mixedindep.sampling import MarginalSpec, default_vine, generate_dataset, independence_vine
from mixedindep.statistics import StatisticKind, _t_units, i_statistic, standardized_i, t_statistic
from mixedindep.transforms import WeightParams
from mixedindep.variance import AnalyticMarginal, analytic_sigma_sq, sigma_hat, sigma_hat_sq

from test_statistics import naive_total_cross

E = MarginalSpec("exponential", 1.5)
P = MarginalSpec("poisson", 2.0)
NB = MarginalSpec("negbinomial", (2, 0.4))
G = MarginalSpec("gamma", (5, 1))
B = MarginalSpec("binomial", (10, 0.4))

TUNINGS = [(0.2, 0.5), (0.2, 1), (0.2, 5), (0.5, 0.2), (0.5, 2), (0.5, 5),
           (1, 1), (1, 5), (2, 1), (2, 5), (5, 5), (10, 10)]

BIKE = str(bundled_path("data/bike_sharing.csv"))


def report(criterion, ok, text):
    line = f"{'PASS' if ok else 'FAIL'} [criterion {criterion}] {text}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def info(criterion, text):
    line = f"INFO [criterion {criterion}] {text}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def test_c01_oracle_equivalence():
    rng = np.random.default_rng(20240101)
    worst, zeros, t0 = 0.0, 0, time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(2, 6))
        r1, r2 = (int(v) for v in rng.integers(1, 3, 2))
        s = random_sample(rng, n, r1, r2)
        wp = random_weight(rng, r1, r2)
        for mode in ("two_vector", "total"):
            for kind, fn in (("I", i_statistic), ("T", t_statistic)):
                ref = oracle_statistic(s, wp, kind, mode)
                val = fn(s, wp, mode)
                if max(abs(ref), abs(val)) < 1e-15:
                    # a constant column makes the exact value 0; both sides are rounding noise
                    zeros += 1
                else:
                    worst = max(worst, abs(val - ref) / abs(ref))
    elapsed = time.perf_counter() - t0
    ok = report(1, worst <= 1e-6 and elapsed < 60,
                f"closed form vs quadrature: max rel err {worst:.2e} (<= 1e-6) over {400 - zeros} values, "
                f"{zeros} exact zeros agree to 1e-15, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_c02_factorized_cross_term():
    rng = np.random.default_rng(20240102)
    worst, count = 0.0, 0
    for r1 in range(1, 4):
        for r2 in range(1, 5 - r1):
            for n in range(1, 6):
                for _ in range(3):
                    s = random_sample(rng, n, r1, r2)
                    wp = random_weight(rng, r1, r2)
                    units = _t_units(s, wp, "total")
                    fact = float(np.mean(np.prod([u.mean(axis=1) for u in units], axis=0)))
                    worst = max(worst, abs(fact - naive_total_cross(s, wp)))
                    count += 1
    ok = report(2, worst <= 1e-12, f"factorized cross term vs multi-sum on {count} samples: max abs err {worst:.1e}")
    assert ok


def test_c03_hand_values(hand_sample, unit_weight):
    s, wp = hand_sample, unit_weight
    t_ref = oracle_statistic(s, wp, "T")
    errs = {
        "I": abs(i_statistic(s, wp) - 1 / 144),
        "sigma^2": abs(sigma_hat_sq(s, wp) - 1 / 5184),
        "st.I": abs(standardized_i(s, wp) - math.sqrt(2) / 2),
        "I vs oracle": abs(i_statistic(s, wp) - oracle_statistic(s, wp, "I")),
    }
    t_rel = abs(t_statistic(s, wp) - t_ref) / t_ref
    t_abs = abs(t_statistic(s, wp) - 1.736111e-4)
    ok = max(errs.values()) <= 1e-12 and t_rel <= 1e-8 and t_abs < 5e-11
    detail = ", ".join(f"{k} err {v:.1e}" for k, v in errs.items())
    report(3, ok, f"{detail}, T={t_statistic(s, wp):.7e} rel err vs oracle {t_rel:.1e}")
    assert ok


# quantile cells at n = 50, 500, 2000 for the 0.95 level
QUANTILE_CELLS = {
    ("E x P", (2, 1)): [1.92, 1.95, 1.96],
    ("E x P", (0.5, 2)): [1.93, 1.95, 1.96],
    ("E x NB", (2, 1)): [1.93, 1.95, 1.96],
    ("E x NB", (0.5, 2)): [1.94, 1.96, 1.97],
}


def test_c04_null_quantile_table():
    designs = {"E x P": [E, P], "E x NB": [E, NB]}
    worst, rows = 0.0, []
    for (name, (a, b)), printed in QUANTILE_CELLS.items():
        got = []
        for n, ref in zip((50, 500, 2000), printed):
            q = mc_null_quantiles(designs[name], WeightParams([a], [b]), n, 10000, [0.95], seed=20240104 + n)[0]
            got.append(q)
            worst = max(worst, abs(q - ref))
        rows.append(f"{name} ({a},{b}): " + " ".join(f"{g:.3f}" for g in got))
    ok = report(4, worst <= 0.05, f"0.95 null quantiles, max |diff| {worst:.3f} (<= 0.05); " + "; ".join(rows))
    assert ok


def _broadcast_cells(r1, r2, mode="two_vector"):
    """D plus T, I and st.I at every tuning, scalars spread over the blocks."""
    cells = [StatisticKind("D", mode)]
    for kind in ("T", "I", "StI"):
        cells += [StatisticKind(kind, mode, WeightParams.broadcast(a, b, r1, r2)) for a, b in TUNINGS]
    return cells


def test_c05_null_calibration():
    designs = {
        "E x P": [E, P], "E x NB": [E, NB], "G x B": [G, B],
        "E^3 x P^3": [E] * 3 + [P] * 3, "E^3 x NB^3": [E] * 3 + [NB] * 3, "G^3 x B^3": [G] * 3 + [B] * 3,
    }
    lo, hi, worst, count, t0 = 100.0, 0.0, 0.0, 0, time.perf_counter()
    for k, (name, margs) in enumerate(designs.items()):
        r1 = sum(m.role == "continuous" for m in margs)
        cells = _broadcast_cells(r1, len(margs) - r1)
        for n in (20, 50):
            cfg = SimulationConfig(margs, independence_vine(len(margs)), n, 5000, cells, seed=20240105 + 10 * k + n)
            rates = [r["rejection_rate_pct"] for r in warp_speed_power(cfg)]
            lo, hi = min(lo, min(rates)), max(hi, max(rates))
            worst = max(worst, max(abs(r - 5.0) for r in rates))
            count += len(rates)
    ok = report(5, worst <= 1.5, f"null rejection rates over {count} cells in [{lo:.2f}, {hi:.2f}] % "
                                 f"(target 5 +- 1.5), {time.perf_counter() - t0:.0f} s")
    assert ok


def _power(margs, vine, n, kind, seed, N=2000):
    cfg = SimulationConfig(margs, vine, n, N, [kind], seed=seed)
    return warp_speed_power(cfg)[0]["rejection_rate_pct"]


def test_c06_power_bivariate():
    st_i = _power([E, P], default_vine(1, 1, "gaussian", None, 0.55), 50,
                  StatisticKind("StI", "two_vector", WeightParams([1.0], [5.0])), 20240106)
    t_n = _power([E, P], default_vine(1, 1, "clayton", None, 0.5), 20,
                 StatisticKind("T", "two_vector", WeightParams([0.2], [0.5])), 20240107)
    ok = abs(st_i - 98) <= 3 and abs(t_n - 33) <= 3
    report(6, ok, f"bivariate power: st.I(1,5) Ga(0.55) n=50 {st_i:.1f} (98 +- 3); "
                  f"T(0.2,0.5) Cl(0.5) n=20 {t_n:.1f} (33 +- 3)")
    assert ok


# (label, marginals, r1, r2, theta1, mode, printed power); st.I (1,5), n=50, Ga(0.35) column
MULTIVARIATE_CELLS = [
    ("E x P^2", [E, P, P], 1, 2, 0.75, "two_vector", 88),
    ("E^2 x P", [E, E, P], 2, 1, 0.75, "two_vector", 87),
    ("E^3 x P^3", [E] * 3 + [P] * 3, 3, 3, 0.75, "two_vector", 96),
    ("total E x P^2", [E, P, P], 1, 2, 0.0, "total", 82),
    ("total E^2 x P", [E, E, P], 2, 1, 0.0, "total", 51),
]


def test_c06_power_multivariate():
    parts, ok = [], True
    for k, (label, margs, r1, r2, th1, mode, ref) in enumerate(MULTIVARIATE_CELLS):
        kind = StatisticKind("StI", mode, WeightParams.broadcast(1, 5, r1, r2))
        got = _power(margs, default_vine(r1, r2, "gaussian", th1, 0.35), 50, kind, 20240108 + k)
        ok &= abs(got - ref) <= 6
        parts.append(f"{label} {got:.1f} ({ref})")
    report(6, ok, "multivariate power (+- 6): " + "; ".join(parts))
    assert ok


@pytest.mark.xfail(strict=True, reason="D power depends on the integration domain; see the decisions ledger")
def test_c06_power_d():
    vine = default_vine(1, 1, "gumbel", None, 1.5)
    got = _power([E, P], vine, 50, StatisticKind("D"), 20240109)
    alt = _power([E, P], vine, 50, StatisticKind("D", d_sigma=2.0, d_domain="full"), 20240109)
    info(6, f"D with the whole-line domain and scale 2: {alt:.1f}")
    ok = report(6, abs(got - 88) <= 5, f"D Gu(1.5) n=50 {got:.1f} (88 +- 5)")
    assert ok


def test_c07_asymptotic_normality():
    vals = null_st_i_values([E, P], WeightParams([2.0], [1.0]), 2000, 10000, seed=20240110)
    vals = vals[np.isfinite(vals)]
    ks = stats.kstest(vals, "norm").statistic
    ok = report(7, ks < 0.02, f"KS distance of null st.I (n=2000, N={vals.size}) to N(0,1): {ks:.4f} (< 0.02)")
    assert ok


def test_c08_ratio_consistency():
    wp = WeightParams([2.0], [1.0])
    true = math.sqrt(analytic_sigma_sq(AnalyticMarginal("exponential", 1.5), AnalyticMarginal("poisson", 2.0), wp))
    rng = np.random.default_rng(20240111)
    vine = independence_vine(2)
    ratios = [sigma_hat(generate_dataset([E, P], vine, 2000, rng), wp) / true for _ in range(200)]
    med = float(np.median(ratios))
    ok = report(8, 0.95 <= med <= 1.05, f"median sigma_hat/sigma over 200 samples at n=2000: {med:.4f} (in [0.95, 1.05])")
    assert ok


def test_c09_bike_data():
    sample = read_mixed_csv(BIKE, "temp,windspeed", "count")
    t0 = time.perf_counter()
    ps = {k: permutation_test(sample, StatisticKind(k), 999, 20240112).pvalue for k in ("I", "T", "StI")}
    elapsed = time.perf_counter() - t0
    ok = all(p < 0.05 for p in ps.values()) and elapsed < 30
    report(9, ok, "bike data p-values " + ", ".join(f"{k}={p:.4f}" for k, p in ps.items())
                  + f" (< 0.05), {elapsed:.1f} s (< 30 s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="D p-value depends on the integration domain; see the decisions ledger")
def test_c09_bike_data_d():
    sample = read_mixed_csv(BIKE, "temp,windspeed", "count")
    t0 = time.perf_counter()
    p = permutation_test(sample, StatisticKind("D"), 999, 20240112).pvalue
    elapsed = time.perf_counter() - t0
    alt = permutation_test(sample, StatisticKind("D", d_sigma=2.0, d_domain="full"), 999, 20240112).pvalue
    info(9, f"D p-value with the whole-line domain and scale 2: {alt:.3f}")
    ok = report(9, abs(p - 0.62) <= 0.1 and elapsed < 30, f"bike data D p-value {p:.3f} (0.62 +- 0.1), {elapsed:.1f} s")
    assert ok


def test_c10_determinism(tmp_path, monkeypatch):
    configs = ["power_cell_gaussian.toml", "smoke_quantiles.toml", "total_design.json"]
    same = []
    for name in configs:
        cmd = "quantiles" if "quantiles" in name else "power"
        outs = []
        for threads in ("1", "3"):
            monkeypatch.setenv("MIXEDINDEP_THREADS", threads)
            dest = tmp_path / f"{name}.{threads}.json"
            assert main([cmd, "--config", str(bundled_path(f"configs/{name}")), "--json", "--output", str(dest)]) == 0
            outs.append(dest.read_bytes())
        json.loads(outs[0])
        same.append(outs[0] == outs[1])
    ok = report(10, all(same), "byte-identical JSON across MIXEDINDEP_THREADS=1/3 for " + ", ".join(configs))
    assert ok
