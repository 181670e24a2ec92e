"""Declarative run configuration (YAML with a closed set of keys).

Sections: ``instance``, ``sweep``, ``run``, ``verify``, ``output``.  Any key
not listed in :data:`SCHEMA` is rejected so that typos fail loudly.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .errors import ConfigError
from .harness import ExperimentConfig

VERIFIERS = (
    "truncation",
    "conditional_moment",
    "gram_growth",
    "estimator_tail",
    "suboptimal_prob",
    "gap_density",
    "indicator_sum",
)

_INT, _FLOAT, _BOOL, _STR = "int", "float", "bool", "str"
_INTS, _FLOATS, _STRS = "int-list", "float-list", "str-list"
_MATRIX = "matrix"  # flat row-major list of numbers, or null

SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "instance": {
        "d_x": (_INT, 20),
        "gamma_r": (_FLOAT, 1.0),
        "sensing": (_MATRIX, None),
        "sigma_x": (_MATRIX, None),
        "sigma_y": (_MATRIX, None),
        "mu_star": (_MATRIX, None),
    },
    "sweep": {
        "n_arms": (_INTS, [10, 20, 50]),
        "d_y": (_INTS, [5, 20, 50]),
    },
    "run": {
        "horizon": (_INT, 2000),
        "repetitions": (_INT, 100),
        "delta": (_FLOAT, 0.05),
        "master_seed": (_INT, 20230517),
        "burn_in": (_INT, 200),
        "percentile": (_FLOAT, 90.0),
        "keep_traces": (_BOOL, False),
    },
    "verify": {
        "which": (_STRS, ["all"]),
        "n_arms": (_INT, 5),
        "d_y": (_INT, 3),
        "horizon": (_INT, 100),
        "repetitions": (_INT, 2000),
        "deltas": (_FLOATS, [0.05, 0.1, 0.2]),
        "samples": (_INT, 100_000),
        "trace_n_arms": (_INT, 10),
        "trace_d_y": (_INT, 10),
        "trace_horizon": (_INT, 2000),
        "scenarios": (_INT, 20),
        "growth_rate": (_FLOAT, 0.5),
        "lambda_t": (_FLOAT, 0.01),
        "design_scale": (_FLOAT, 50.0),
        "tail_replicates": (_INT, 5000),
        "epsilons": (_FLOATS, [0.5, 1.0, 2.0]),
        "gap_n_arms": (_INTS, [2, 5, 10]),
        "gap_samples": (_INT, 1_000_000),
    },
    "output": {
        "dir": (_STR, "results"),
        "traces": (_STR, "traces.csv"),
        "summary": (_STR, "summary.csv"),
        "reports": (_STR, "reports.csv"),
        "plots": (_BOOL, True),
    },
}


def _coerce(section: str, key: str, kind: str, value):
    where = f"{section}.{key}"

    def num(v, integer):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {v!r}")
        if integer:
            if isinstance(v, float) and not v.is_integer():
                raise ConfigError(f"{where}: expected an integer, got {v!r}")
            return int(v)
        return float(v)

    if kind == _INT:
        return num(value, True)
    if kind == _FLOAT:
        return num(value, False)
    if kind == _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if kind == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if kind in (_INTS, _FLOATS, _MATRIX):
        if value is None and kind == _MATRIX:
            return None
        if not isinstance(value, list):
            value = [value]
        return [num(v, kind == _INTS) for v in value]
    if kind == _STRS:
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where}: expected a list of strings")
        return list(value)
    raise AssertionError(kind)


def defaults() -> dict:
    return {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def resolve(raw: dict | None) -> dict:
    """Merge a parsed document over the defaults, checking every key."""
    cfg = defaults()
    if raw is None:
        return cfg
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a mapping of sections")
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            cfg[section][key] = _coerce(section, key, SCHEMA[section][key][0], value)
    return cfg


def load(path: str | Path | None) -> dict:
    if path is None:
        return resolve(None)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from None
    return resolve(raw)


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)


def fingerprint(cfg: dict) -> str:
    """Short hash of everything that determines the numbers (not output paths)."""
    core = {k: cfg[k] for k in ("instance", "sweep", "run")}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()[:16]


def to_experiment(cfg: dict, threads: int = 1) -> ExperimentConfig:
    inst, sweep, run = cfg["instance"], cfg["sweep"], cfg["run"]
    exp = ExperimentConfig(
        n_arms=list(sweep["n_arms"]),
        d_y=list(sweep["d_y"]),
        d_x=inst["d_x"],
        horizon=run["horizon"],
        repetitions=run["repetitions"],
        delta=run["delta"],
        master_seed=run["master_seed"],
        burn_in=run["burn_in"],
        percentile=run["percentile"],
        gamma_r=inst["gamma_r"],
        sensing=inst["sensing"],
        sigma_x=inst["sigma_x"],
        sigma_y=inst["sigma_y"],
        mu_star=inst["mu_star"],
        keep_traces=run["keep_traces"],
        threads=threads,
        out_dir=cfg["output"]["dir"],
    )
    return exp.validate()


def selected_verifiers(which: list[str]) -> list[str]:
    if not which:
        raise ConfigError("no verifier selected")
    if "all" in which:
        return list(VERIFIERS)
    unknown = [w for w in which if w not in VERIFIERS]
    if unknown:
        raise ConfigError(f"unknown verifier(s): {', '.join(unknown)}")
    return [v for v in VERIFIERS if v in which]
