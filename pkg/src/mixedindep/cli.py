"""Command-line interface: ``mixedindep test | power | quantiles``.

Exit codes: 0 success, 2 malformed input (CSV, config or arguments),
3 data that violates the sample invariants (X > 0, Y integer >= 0).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .config import ConfigError, StudyConfig, load_study
from .inference import (
    DEFAULT_PERMUTATIONS,
    SimulationConfig,
    asymptotic_test,
    mc_null_quantiles,
    permutation_test,
    warp_speed_power,
)
from .statistics import DEFAULT_D_SIGMA, D_DOMAINS, StatisticKind, default_weight, normalize_kind
from .transforms import MixedSample, WeightParams, normalize_mode
from .variance import DegenerateVariance

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3
ASYMPTOTIC_MIN_N = 500
_INT_RE = re.compile(r"^[+-]?\d+$")


class InputError(Exception):
    """Malformed input; exit code 2."""


class InvariantError(Exception):
    """Data violating the sample invariants; exit code 3."""


# --- CSV -------------------------------------------------------------------------------


def _resolve(header: list, spec: str) -> list[int]:
    cols = []
    for tok in (t.strip() for t in spec.split(",")):
        if tok in header:
            cols.append(header.index(tok))
        elif tok.isdigit() and int(tok) < len(header):
            cols.append(int(tok))
        else:
            raise InputError(f"unknown column {tok!r}; header is {header}")
    return cols


def read_mixed_csv(path: str, x_cols: str, y_cols: str) -> MixedSample:
    """Read a CSV with a header row into a sample.

    ``x_cols`` and ``y_cols`` are comma-separated column names or 0-based
    indices.  Count cells must be written as integers.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    xi, yi = _resolve(header, x_cols), _resolve(header, y_cols)
    if set(xi) & set(yi):
        raise InputError("continuous and count columns must be disjoint")
    x = np.empty((len(rows) - 1, len(xi)))
    y = np.empty((len(rows) - 1, len(yi)), dtype=np.int64)
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != len(header):
            raise InputError(f"{path}: line {line} has {len(row)} fields, expected {len(header)}")
        for k, c in enumerate(xi):
            cell = row[c].strip()
            try:
                v = float(cell)
            except ValueError:
                raise InputError(f"{path}: line {line}, column {header[c]!r}: {cell!r} is not a number") from None
            if not (math.isfinite(v) and v > 0):
                raise InvariantError(
                    f"{path}: line {line}, column {header[c]!r}: continuous value {cell} must be positive"
                )
            x[r, k] = v
        for k, c in enumerate(yi):
            cell = row[c].strip()
            if not _INT_RE.match(cell):
                try:
                    float(cell)
                except ValueError:
                    raise InputError(f"{path}: line {line}, column {header[c]!r}: {cell!r} is not a number") from None
                raise InvariantError(f"{path}: line {line}, column {header[c]!r}: count value {cell} is not an integer")
            v = int(cell)
            if v < 0:
                raise InvariantError(f"{path}: line {line}, column {header[c]!r}: count value {cell} is negative")
            y[r, k] = v
    return MixedSample(x, y)


# --- output ----------------------------------------------------------------------------


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Right-aligned plain-text table."""
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h)) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _fmt_vec(v) -> str:
    if v is None:
        return "-"
    return ",".join(f"{x:g}" for x in v)


def _emit(args, payload: dict, table: str) -> None:
    text = dump_json(payload)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text if args.json else table)


# --- commands --------------------------------------------------------------------------


def _floats(raw: Optional[str]):
    if raw is None:
        return None
    try:
        return [float(v) for v in raw.split(",")]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {raw!r}") from None


def _test_kinds(args, sample: MixedSample) -> list[StatisticKind]:
    mode = normalize_mode(args.mode)
    a, b = _floats(args.a), _floats(args.b)
    wp = None
    if a is not None or b is not None:
        base = default_weight(mode, sample.r1, sample.r2)
        a = base.a if a is None else a
        b = base.b if b is None else b
        wp = WeightParams.broadcast(np.asarray(a), np.asarray(b), sample.r1, sample.r2)
    kinds = []
    for tok in args.stat.split(","):
        kind = normalize_kind(tok.strip())
        if kind == "D":
            kinds.append(StatisticKind("D", mode, None, args.sigma, args.d_domain))
        else:
            kinds.append(StatisticKind(kind, mode, wp))
    return kinds


def cmd_test(args) -> int:
    sample = read_mixed_csv(args.input, args.x, args.y)
    if args.perms < 1:
        raise InputError("--perms must be at least 1")
    try:
        kinds = _test_kinds(args, sample)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    outcomes = []
    for kind in kinds:
        try:
            if args.asymptotic and kind.kind == "StI":
                if sample.n < ASYMPTOTIC_MIN_N:
                    print(
                        f"warning: normal approximation used with n={sample.n} < {ASYMPTOTIC_MIN_N}",
                        file=sys.stderr,
                    )
                outcomes.append(asymptotic_test(sample, kind))
            else:
                outcomes.append(permutation_test(sample, kind, args.perms, args.seed))
        except DegenerateVariance as exc:
            raise InvariantError(f"{kind.label}: {exc}") from None
    for o in outcomes:
        # rounding can leave T a hair below zero; the API keeps the raw value
        if o.statistic == "T" and o.value < 0:
            o.value = 0.0
    records = [o.as_record() for o in outcomes]
    payload = {"command": "test", "input": args.input, "n": sample.n, "results": records}
    rows = []
    for o in outcomes:
        par = o.params
        tuning = f"sigma={_fmt_vec(par['sigma'])}" if "sigma" in par else f"a={_fmt_vec(par['a'])} b={_fmt_vec(par['b'])}"
        rows.append([o.statistic, o.mode, f"{o.value:.6g}", f"{o.pvalue:.4f}", o.method, tuning])
    _emit(args, payload, format_table(["statistic", "mode", "value", "p-value", "method", "parameters"], rows))
    return EXIT_OK


def _study_header(study: StudyConfig) -> dict:
    return {
        "marginals": [str(m) for m in study.marginals],
        "design": study.design,
        "mode": study.mode,
        "N": study.N,
        "seed": study.seed,
    }


def run_power(study: StudyConfig, threads: Optional[int] = None) -> dict:
    results = []
    for n in study.sizes:
        sim = SimulationConfig(
            study.marginals, study.vine, n, study.N, study.statistics, study.seed, study.alpha, study.design
        )
        for rec, kind in zip(warp_speed_power(sim, threads), study.statistics):
            rec["sigma"] = list(kind.d_sigma) if kind.kind == "D" else None
            results.append(rec)
    return {"command": "power", "alpha": study.alpha, **_study_header(study), "results": results}


def power_table(payload: dict) -> str:
    rows = []
    for r in payload["results"]:
        tuning = f"sigma={_fmt_vec(r['sigma'])}" if r["sigma"] else f"({_fmt_vec(r['a'])};{_fmt_vec(r['b'])})"
        rows.append([r["statistic"], tuning, str(r["n"]), str(r["N"]), f"{r['rejection_rate_pct']:.1f}"])
    title = f"rejection rates (%), alpha={payload['alpha']:g}, {' x '.join(payload['marginals'])}"
    return title + "\n" + format_table(["statistic", "(a;b)", "n", "N", "rate"], rows)


def run_quantiles(study: StudyConfig, threads: Optional[int] = None) -> dict:
    results = []
    for kind in study.statistics:
        wp = kind.weight or default_weight(study.mode, study.r1, study.r2)
        for n in study.sizes:
            q = mc_null_quantiles(study.marginals, wp, n, study.N, study.levels, study.seed, study.mode, threads)
            for level, val in zip(study.levels, q):
                results.append({
                    "a": wp.a.tolist(), "b": wp.b.tolist(), "n": n, "level": level, "quantile": float(val),
                })
    limits = {f"{lv:g}": float(stats.norm.ppf(0.5 + 0.5 * lv)) for lv in study.levels}
    return {"command": "quantiles", **_study_header(study), "limits": limits, "results": results}


def quantile_table(payload: dict) -> str:
    sizes = sorted({r["n"] for r in payload["results"]})
    rows = []
    for level in dict.fromkeys(r["level"] for r in payload["results"]):
        keys = dict.fromkeys((tuple(r["a"]), tuple(r["b"])) for r in payload["results"] if r["level"] == level)
        for a, b in keys:
            vals = {r["n"]: r["quantile"] for r in payload["results"]
                    if r["level"] == level and tuple(r["a"]) == a and tuple(r["b"]) == b}
            rows.append([f"{level:g}", f"({_fmt_vec(a)};{_fmt_vec(b)})"] + [f"{vals[n]:.2f}" for n in sizes])
        lim = payload["limits"][f"{level:g}"]
        rows.append([f"{level:g}", "limit"] + [f"{lim:.2f}"] * len(sizes))
    title = f"null quantiles of sqrt(n)|I|/sigma_hat, N={payload['N']}, {' x '.join(payload['marginals'])}"
    return title + "\n" + format_table(["1-alpha", "(a;b)"] + [str(n) for n in sizes], rows)


def cmd_power(args) -> int:
    payload = run_power(load_study(args.config, "power"))
    _emit(args, payload, power_table(payload))
    return EXIT_OK


def cmd_quantiles(args) -> int:
    payload = run_quantiles(load_study(args.config, "quantiles"))
    _emit(args, payload, quantile_table(payload))
    return EXIT_OK


# --- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixedindep", description="Independence tests for mixed continuous/count data.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test independence on a CSV file")
    t.add_argument("--input", required=True, help="CSV file with a header row")
    t.add_argument("--x", required=True, help="continuous columns (names or 0-based indices)")
    t.add_argument("--y", required=True, help="count columns (names or 0-based indices)")
    t.add_argument("--stat", default="i,t,sti", help="comma-separated subset of i,t,sti,d")
    t.add_argument("--mode", default="two-vector", help="two-vector or total")
    t.add_argument("--a", help="weight parameter a (one value or one per continuous column)")
    t.add_argument("--b", help="weight parameter b (one value or one per count column)")
    t.add_argument("--sigma", type=float, default=DEFAULT_D_SIGMA, help="weight scale of D")
    t.add_argument("--d-domain", default="orthant", choices=D_DOMAINS, help="integration domain of D")
    t.add_argument("--perms", type=int, default=DEFAULT_PERMUTATIONS, help="number of permutations")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--asymptotic", action="store_true", help="normal-approximation p-value for st.I")
    t.set_defaults(func=cmd_test)

    for name, func, helptext in (
        ("power", cmd_power, "warp-speed power study from a config file"),
        ("quantiles", cmd_quantiles, "Monte-Carlo null quantiles from a config file"),
    ):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--config", required=True, help="TOML or JSON study file")
        c.set_defaults(func=func)

    for c in sub.choices.values():
        c.add_argument("--json", action="store_true", help="print JSON instead of a table")
        c.add_argument("--output", help="also write the JSON result to this file")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
