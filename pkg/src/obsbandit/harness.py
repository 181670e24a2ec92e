"""Seeded regret experiments over grids of arm counts and observation dimensions."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadDimension, ConfigError, IndexOutOfRange, TooShort
from .model import ProblemInstance, default_instance, derive
from .policy import PolicyConfig, RegretTrace, run_scenario
from .rng import Stream

TRACE_COLUMNS = "N,d_y,t,mean_regret,worst_regret,{p}_regret,mean_normalized,worst_normalized"
SUMMARY_COLUMNS = "N,d_y,at_round,mean,worst,{p}"

# scenario-path prefixes under the master seed
_INSTANCE_KEY = 0
_SCENARIO_KEY = 1


@dataclass
class ExperimentConfig:
    n_arms: list[int] = field(default_factory=lambda: [10, 20, 50])
    d_y: list[int] = field(default_factory=lambda: [5, 20, 50])
    d_x: int = 20
    horizon: int = 2000
    repetitions: int = 100
    delta: float = 0.05
    master_seed: int = 20230517
    burn_in: int = 200
    percentile: float = 90.0
    gamma_r: float = 1.0
    # explicit matrices replace the random default instance; flat row-major lists
    sensing: list[float] | None = None
    sigma_x: list[float] | None = None
    sigma_y: list[float] | None = None
    mu_star: list[float] | None = None
    keep_traces: bool = False
    record_eigs: bool = False
    threads: int = 1
    out_dir: str = "results"

    def validate(self) -> "ExperimentConfig":
        if self.repetitions < 1 or self.horizon < 1:
            raise ConfigError("repetitions and horizon must be >= 1")
        if not self.n_arms or not self.d_y:
            raise ConfigError("sweep lists must be non-empty")
        if min(self.n_arms) < 1 or min(self.d_y) < 1 or self.d_x < 1:
            raise ConfigError("every swept value and d_x must be >= 1")
        if not 0.0 < self.delta < 0.25:
            raise ConfigError("delta must lie in (0, 0.25)")
        if not 0.0 <= self.percentile <= 100.0:
            raise ConfigError("percentile must lie in [0, 100]")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if any(getattr(self, k) is not None for k in ("sensing", "sigma_y")) and len(set(self.d_y)) > 1:
            raise ConfigError("explicit sensing/sigma_y require a single d_y in the sweep")
        return self

    @property
    def percentile_label(self) -> str:
        return f"p{self.percentile:g}"

    def cells(self) -> list[tuple[int, int]]:
        return sorted({(int(n), int(d)) for n in self.n_arms for d in self.d_y})


def build_instance(config: ExperimentConfig, n_arms: int, d_y: int) -> ProblemInstance:
    """Default random instance for a cell, with any explicit overrides applied."""
    inst = default_instance(n_arms, config.d_x, d_y, Stream(config.master_seed, (_INSTANCE_KEY,)), config.gamma_r)
    shapes = {"sensing": (d_y, config.d_x), "sigma_x": (config.d_x, config.d_x), "sigma_y": (d_y, d_y), "mu_star": (config.d_x,)}
    changes = {}
    for name, shape in shapes.items():
        value = getattr(config, name)
        if value is None:
            continue
        arr = np.asarray(value, dtype=float).ravel()
        if arr.size != int(np.prod(shape)):
            raise BadDimension(f"{name}: expected {int(np.prod(shape))} entries, got {arr.size}")
        changes[name] = arr.reshape(shape)
    return inst.with_(**changes) if changes else inst


def scenario_stream(config: ExperimentConfig, n_arms: int, d_y: int, rep: int) -> Stream:
    return Stream(config.master_seed, (_SCENARIO_KEY, n_arms, d_y, config.d_x, rep))


@dataclass(eq=False)
class AggregateSeries:
    """Per-round statistics over the repetitions of one sweep cell."""

    n_arms: int
    d_y: int
    mean: np.ndarray
    worst: np.ndarray
    upper: np.ndarray  # pointwise percentile
    percentile: float
    repetitions: int
    traces: list[RegretTrace] | None = field(default=None, repr=False)

    @property
    def mean_normalized(self) -> np.ndarray:
        return normalize(self.mean)

    @property
    def worst_normalized(self) -> np.ndarray:
        return normalize(self.worst)

    @property
    def horizon(self) -> int:
        return len(self.mean)


def aggregate(cum_regret: np.ndarray, n_arms: int, d_y: int, percentile: float = 90.0, traces=None) -> AggregateSeries:
    """Collapse a ``(repetitions, T)`` matrix of cumulative regret."""
    cum_regret = np.atleast_2d(np.asarray(cum_regret, dtype=float))
    return AggregateSeries(
        n_arms=n_arms,
        d_y=d_y,
        mean=cum_regret.mean(axis=0),
        worst=cum_regret.max(axis=0),
        upper=np.percentile(cum_regret, percentile, axis=0),
        percentile=percentile,
        repetitions=cum_regret.shape[0],
        traces=traces,
    )


def normalize(series) -> np.ndarray:
    """``series[t] / ln t`` for rounds ``t = 2..T`` (round 1 is dropped)."""
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 2:
        raise TooShort("need at least two rounds to normalize")
    t = np.arange(2, series.shape[0] + 1)
    return series[1:] / np.log(t)


def _run_one(args) -> RegretTrace:
    config, n_arms, d_y, rep, inst, derived = args
    policy = PolicyConfig(record_eigs=config.record_eigs)
    return run_scenario(inst, derived, config.horizon, scenario_stream(config, n_arms, d_y, rep), policy)


def run_cell(config: ExperimentConfig, n_arms: int, d_y: int, executor=None) -> AggregateSeries:
    inst = build_instance(config, n_arms, d_y)
    derived = derive(inst)
    jobs = [(config, n_arms, d_y, rep, inst, derived) for rep in range(config.repetitions)]
    traces = list(executor.map(_run_one, jobs)) if executor else [_run_one(j) for j in jobs]
    matrix = np.stack([tr.cum_regret for tr in traces])
    return aggregate(matrix, n_arms, d_y, config.percentile, traces if config.keep_traces else None)


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("OBSBANDIT_THREADS")
    return max(1, int(env)) if env else 1


def run_sweep(config: ExperimentConfig) -> dict[tuple[int, int], AggregateSeries]:
    """Run every ``(N, d_y)`` cell; results are independent of thread count."""
    config.validate()
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            return {cell: run_cell(config, *cell, executor=pool) for cell in config.cells()}
    return {cell: run_cell(config, *cell) for cell in config.cells()}


def summarize_final(results: dict[tuple[int, int], AggregateSeries], at_round: int) -> list[tuple]:
    """``(N, d_y, at_round, mean, worst, percentile)`` rows sorted by ``(N, d_y)``."""
    rows = []
    for (n, d), agg in sorted(results.items()):
        if not 1 <= at_round <= agg.horizon:
            raise IndexOutOfRange(f"round {at_round} outside [1, {agg.horizon}]")
        i = at_round - 1
        rows.append((n, d, at_round, float(agg.mean[i]), float(agg.worst[i]), float(agg.upper[i])))
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def traces_csv(results: dict[tuple[int, int], AggregateSeries]) -> str:
    aggs = [results[k] for k in sorted(results)]
    label = f"p{aggs[0].percentile:g}" if aggs else "p90"
    lines = [TRACE_COLUMNS.format(p=label)]
    for agg in aggs:
        mean_n, worst_n = agg.mean_normalized, agg.worst_normalized
        for i in range(agg.horizon):
            t = i + 1
            norm = ("", "") if t == 1 else (_fmt(mean_n[i - 1]), _fmt(worst_n[i - 1]))
            lines.append(
                f"{agg.n_arms},{agg.d_y},{t},{_fmt(agg.mean[i])},{_fmt(agg.worst[i])},{_fmt(agg.upper[i])},{norm[0]},{norm[1]}"
            )
    return "\n".join(lines) + "\n"


def summary_csv(rows: list[tuple], percentile: float = 90.0) -> str:
    lines = [SUMMARY_COLUMNS.format(p=f"p{percentile:g}")]
    for n, d, at, mean, worst, upper in rows:
        lines.append(f"{n},{d},{at},{_fmt(mean)},{_fmt(worst)},{_fmt(upper)}")
    return "\n".join(lines) + "\n"


def atomic_write(path: str | Path, text: str) -> Path:
    """Write via a temporary sibling and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path
