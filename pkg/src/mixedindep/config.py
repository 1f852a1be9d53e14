"""Simulation configuration files (TOML or JSON).

Schema::

    [marginals]
    continuous = [{family = "exponential", params = [1.5]}]
    count = [{family = "poisson", params = [2]}]

    [vine]                      # optional; default is the independence vine
    family = "gaussian"         # default stand-in structure ...
    theta1 = 0.75               # same-type edges in tree 1 (optional)
    theta2 = 0.55               # cross-type edge (and deeper trees)
    theta3 = 0.3                # deeper trees (optional)
    # ... or an explicit regular vine on columns 0..d-1 (continuous first):
    # edges = [{tree = 1, a = 0, b = 1, cond = [], family = "clayton", theta = 0.5}]

    [study]
    n = [20, 50]                # one size or a list
    N = 2000                    # Monte-Carlo replicates
    seed = 0
    alpha = 0.05                # power only
    mode = "two-vector"         # or "total"
    levels = [0.95, 0.99]       # quantiles only
    design = "E(1.5) x P(2)"    # free-text label (optional)
    statistics = [{kind = "sti", a = 1, b = 5}, {kind = "d", sigma = 0.5}]

For ``quantiles`` only the ``a``/``b`` entries of ``statistics`` are used
(each entry is one weight); ``kind`` defaults to ``"sti"``.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .sampling import MarginalSpec, VineSpec, default_vine, independence_vine, vine_from_records
from .statistics import DEFAULT_D_SIGMA, StatisticKind, normalize_kind
from .transforms import WeightParams, normalize_mode


class ConfigError(ValueError):
    """The configuration file is missing, unreadable or invalid."""


@dataclass
class StudyConfig:
    marginals: list
    vine: VineSpec
    sizes: list
    N: int
    seed: int = 0
    alpha: float = 0.05
    mode: str = "two_vector"
    levels: list = field(default_factory=lambda: [0.95, 0.99])
    statistics: list = field(default_factory=list)
    design: str = ""
    raw: dict = field(default_factory=dict)

    @property
    def r1(self) -> int:
        return sum(m.role == "continuous" for m in self.marginals)

    @property
    def r2(self) -> int:
        return len(self.marginals) - self.r1


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def _marginal(entry, role) -> MarginalSpec:
    if not isinstance(entry, dict) or "family" not in entry:
        raise ConfigError(f"{role} marginal must be a table with a 'family' key")
    spec = MarginalSpec(entry["family"], tuple(entry.get("params", ())))
    if spec.role != role:
        raise ConfigError(f"{spec} is listed as {role} but is a {spec.role} family")
    return spec


def _weight(entry: dict, r1: int, r2: int, mode: str) -> Optional[WeightParams]:
    if "a" not in entry and "b" not in entry:
        return None
    a = entry.get("a", 1.0)
    b = entry.get("b", 5.0 if mode == "two_vector" else 1.0)
    return WeightParams.broadcast(a, b, r1, r2)


def _statistic(entry, r1: int, r2: int, mode: str, default_kind: str) -> StatisticKind:
    if not isinstance(entry, dict):
        raise ConfigError("each statistics entry must be a table")
    kind = normalize_kind(entry.get("kind", default_kind))
    if kind == "D":
        return StatisticKind(
            "D", mode, None, entry.get("sigma", DEFAULT_D_SIGMA), entry.get("domain", "orthant")
        )
    return StatisticKind(kind, mode, _weight(entry, r1, r2, mode))


def _vine(section: dict, r1: int, r2: int) -> VineSpec:
    d = r1 + r2
    if not section:
        return independence_vine(d)
    if "edges" in section:
        return vine_from_records(d, section["edges"])
    fam = section.get("family", "independence")
    return default_vine(r1, r2, fam, section.get("theta1"), section.get("theta2"), section.get("theta3"))


def parse_study(raw: dict, command: str) -> StudyConfig:
    """Validate a parsed config mapping for ``command`` ("power" or "quantiles")."""
    try:
        margs = raw.get("marginals", {})
        cont = [_marginal(e, "continuous") for e in margs.get("continuous", [])]
        count = [_marginal(e, "count") for e in margs.get("count", [])]
        if not cont or not count:
            raise ConfigError("need at least one continuous and one count marginal")
        r1, r2 = len(cont), len(count)
        study = raw.get("study", {})
        mode = normalize_mode(study.get("mode", "two-vector"))
        sizes = study.get("n", 50)
        sizes = [int(v) for v in (sizes if isinstance(sizes, list) else [sizes])]
        if not sizes or min(sizes) < 2:
            raise ConfigError("sample sizes must be at least 2")
        N = int(study.get("N", 1000))
        if N < 1:
            raise ConfigError("N must be at least 1")
        alpha = float(study.get("alpha", 0.05))
        if not 0 < alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        levels = [float(v) for v in study.get("levels", [0.95, 0.99])]
        if any(not 0 < v < 1 for v in levels) or not levels:
            raise ConfigError("levels must lie in (0, 1)")
        default_kind = "sti"
        entries = study.get("statistics", [{"kind": default_kind}])
        stats = [_statistic(e, r1, r2, mode, default_kind) for e in entries]
        if command == "quantiles" and any(s.kind != "StI" for s in stats):
            raise ConfigError("quantiles are computed for the standardized I statistic only")
        return StudyConfig(
            cont + count, _vine(raw.get("vine", {}), r1, r2), sizes, N, int(study.get("seed", 0)),
            alpha, mode, levels, stats, str(study.get("design", "")), raw,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_study(path, command: str) -> StudyConfig:
    return parse_study(read_config_file(path), command)
