"""Command-line front end: ``run``, ``verify``, ``plot`` and ``kn``.

Exit codes: 0 success, 1 runtime error, 2 configuration/input error,
3 a verifier reported a violated bound.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, config as cfgmod, plotting
from .errors import BadRange, ConfigError, SchemaError
from .harness import (
    atomic_write,
    build_instance,
    resolve_threads,
    run_sweep,
    summarize_final,
    summary_csv,
    traces_csv,
)
from .model import default_instance, derive
from .policy import PolicyConfig, run_scenario
from .rng import Purpose, Stream

log = logging.getLogger("obsbandit")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3

_VERIFY_KEY = 2
_KN_KEY = 3


def _global_flags(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    parser.add_argument("--config", default=s, help="YAML config file")
    parser.add_argument("--seed", type=int, default=s, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", default=s, help="output directory")
    parser.add_argument("--threads", type=int, default=s, help="worker processes (env OBSBANDIT_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obsbandit", description=__doc__.splitlines()[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the regret sweep and write CSV/SVG outputs")
    _global_flags(p)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--n-arms", type=int, nargs="+", dest="n_arms")
    p.add_argument("--d-y", type=int, nargs="+", dest="d_y")

    p = sub.add_parser("verify", help="run Monte Carlo checks of the regret analysis")
    _global_flags(p)
    p.add_argument("--which", nargs="*", help=f"any of: all {' '.join(cfgmod.VERIFIERS)}")

    p = sub.add_parser("plot", help="render SVG figures from trace and summary CSVs")
    _global_flags(p)
    p.add_argument("traces", help="per-round trace CSV")
    p.add_argument("summary", help="final-round summary CSV")

    p = sub.add_parser("kn", help="tabulate E[(max of N standard normals)^2]")
    _global_flags(p)
    p.add_argument("n_min", type=int)
    p.add_argument("n_max", type=int)
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo draws per row")
    return parser


def _load(args) -> dict:
    cfg = cfgmod.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg["run"]["master_seed"] = args.seed
    if getattr(args, "out", None) is not None:
        cfg["output"]["dir"] = args.out
    return cfg


def _threads(args) -> int:
    return resolve_threads(getattr(args, "threads", None))


def write_figures(traces_path, summary_path, out_dir, note: str) -> list[Path]:
    series = plotting.read_traces(traces_path)
    label, rows = plotting.read_summary(summary_path)
    out_dir = Path(out_dir)
    return [
        atomic_write(out_dir / "fig1_normalized.svg", plotting.figure_normalized(series, note)),
        atomic_write(out_dir / "fig2_final.svg", plotting.figure_final(rows, label, note)),
    ]


def cmd_run(args) -> int:
    cfg = _load(args)
    for key in ("repetitions", "horizon"):
        if getattr(args, key, None) is not None:
            cfg["run"][key] = getattr(args, key)
    for key in ("n_arms", "d_y"):
        if getattr(args, key, None):
            cfg["sweep"][key] = list(getattr(args, key))
    cfg = cfgmod.resolve(cfg)  # re-check overridden values
    exp = cfgmod.to_experiment(cfg, _threads(args))
    out = Path(cfg["output"]["dir"])
    log.info("running %d cell(s) x %d repetition(s), T=%d", len(exp.cells()), exp.repetitions, exp.horizon)

    results = run_sweep(exp)
    rows = summarize_final(results, exp.horizon)
    traces_path = atomic_write(out / cfg["output"]["traces"], traces_csv(results))
    summary_path = atomic_write(out / cfg["output"]["summary"], summary_csv(rows, exp.percentile))
    atomic_write(out / "envelope.csv", _envelope_csv(results, exp))
    atomic_write(out / "resolved_config.yaml", cfgmod.dump(cfg))
    if cfg["output"]["plots"]:
        write_figures(traces_path, summary_path, out, f"config {cfgmod.fingerprint(cfg)}")
    for n, d, at, mean, worst, upper in rows:
        print(f"N={n:<4d} d_y={d:<4d} Regret({at}): mean={mean:.4f} {exp.percentile_label}={upper:.4f} worst={worst:.4f}")
    return EXIT_OK


def _envelope_csv(results, exp) -> str:
    lines = ["N,d_y,fitted_C,t_star"]
    for (n, d), agg in sorted(results.items()):
        if agg.horizon < 2:
            continue
        derived = derive(build_instance(exp, n, d))
        consts = analysis.theory_constants(n, d, exp.horizon, exp.delta)
        t = np.arange(2, agg.horizon + 1)
        c = analysis.fit_envelope_constant(t, agg.mean[1:], consts, derived)
        lines.append(f"{n},{d},{c:.10g},{consts.t_star:.10g}")
    return "\n".join(lines) + "\n"


def collect_reports(cfg: dict, names: list[str]) -> list[analysis.BoundReport]:
    """Run the selected verifiers with settings from the ``verify`` section."""
    v, run = cfg["verify"], cfg["run"]
    seed, d_x, delta = run["master_seed"], cfg["instance"]["d_x"], run["delta"]
    root = Stream(seed, (_VERIFY_KEY,))
    small = default_instance(v["n_arms"], d_x, v["d_y"], root.child(0), cfg["instance"]["gamma_r"])
    small_derived = derive(small)
    reports: list[analysis.BoundReport] = []
    traces = None

    def trace_setup():
        nonlocal traces
        inst = default_instance(v["trace_n_arms"], d_x, v["trace_d_y"], root.child(1), cfg["instance"]["gamma_r"])
        derived = derive(inst)
        if traces is None:
            policy = PolicyConfig(record_eigs=True)
            traces = [
                run_scenario(inst, derived, v["trace_horizon"], root.child(2, rep), policy) for rep in range(v["scenarios"])
            ]
        return inst, derived, traces

    for name in names:
        gen = root.child(10, cfgmod.VERIFIERS.index(name)).generator(0, Purpose.VERIFY)
        log.info("verifier %s", name)
        if name == "truncation":
            maxima = analysis.truncation_maxima(small, small_derived, v["horizon"], v["repetitions"], root.child(3))
            for d in v["deltas"]:
                reports.append(analysis.verify_truncation(small, small_derived, v["horizon"], d, len(maxima), None, maxima=maxima))
        elif name == "conditional_moment":
            eta = small_derived.eta_star
            moment = analysis.conditional_second_moment(small_derived, eta, small.n_arms, v["samples"], gen)
            reports.append(analysis.verify_conditional_moment(small_derived, eta, small.n_arms, v["samples"], None, moment=moment))
            reports.append(analysis.verify_moment_trace(moment, small.n_arms, v["samples"]))
        elif name == "gram_growth":
            inst, derived, trs = trace_setup()
            formal = [analysis.verify_gram_growth(tr.gram_min_eig, derived, inst.n_arms, v["trace_horizon"], delta) for tr in trs]
            desk = [analysis.verify_desk_growth(tr.whitened_min_eig, rate=v["growth_rate"], t_from=run["burn_in"]) for tr in trs]
            for label, group in (("gram_growth", formal), (desk[0].name if desk else "desk_growth", desk)):
                worst = max(r.lhs for r in group)
                reports.append(analysis.BoundReport.check(label, worst, 1.0, sum(r.samples for r in group)))
        elif name == "estimator_tail":
            d = small.d_y
            c = v["design_scale"]
            if c <= 1.0:
                raise ConfigError("verify.design_scale must exceed 1 (the prior contributes the identity)")
            design = np.sqrt(c - 1.0) * np.eye(d)
            g2 = small_derived.gamma_ry_sq
            eps = [k * np.sqrt(d * g2 / c) for k in v["epsilons"]]
            errors = analysis.estimator_errors(design, np.eye(d), small_derived.eta_star, g2, v["tail_replicates"], gen)
            reports.extend(
                analysis.verify_estimator_tail(design, np.eye(d), small_derived.eta_star, g2, eps, len(errors), None, errors=errors)
            )
            reports.extend(analysis.verify_estimator_chi(errors, eps, c, d, g2))
        elif name == "suboptimal_prob":
            reports.append(
                analysis.verify_suboptimal_prob(
                    small_derived, small.n_arms, v["lambda_t"], v["samples"], gen, horizon=v["horizon"], delta=delta
                )
            )
        elif name == "gap_density":
            for n in v["gap_n_arms"]:
                if n < 2:
                    raise ConfigError("verify.gap_n_arms entries must be >= 2")
                gaps = analysis.top_two_gaps(n, v["gap_samples"], gen)
                reports.append(analysis.verify_gap_density(n, len(gaps), None, gaps=gaps))
                if n == 2:
                    reports.append(analysis.verify_gap_closed_form(gaps))
        elif name == "indicator_sum":
            inst, derived, trs = trace_setup()
            reports.append(analysis.verify_indicator_sum(trs, derived, inst.n_arms, v["trace_horizon"], delta, t_from=run["burn_in"]))
    return reports


def cmd_verify(args) -> int:
    cfg = _load(args)
    which = args.which if args.which is not None else cfg["verify"]["which"]
    names = cfgmod.selected_verifiers(which)
    reports = collect_reports(cfg, names)
    out = Path(cfg["output"]["dir"])
    atomic_write(out / cfg["output"]["reports"], analysis.format_reports(reports))
    for r in reports:
        print(f"{'PASS' if r.holds else 'FAIL'}  {r.name}: lhs={r.lhs:.6g} rhs={r.rhs:.6g} (n={r.samples})")
    return EXIT_OK if all(r.holds for r in reports) else EXIT_VERIFY


def cmd_plot(args) -> int:
    traces = Path(args.traces)
    out = Path(getattr(args, "out", None) or traces.parent)
    resolved = traces.parent / "resolved_config.yaml"
    note = f"config {cfgmod.fingerprint(cfgmod.load(resolved))}" if resolved.exists() else "config unknown"
    for path in write_figures(traces, args.summary, out, note):
        print(path)
    return EXIT_OK


def cmd_kn(args) -> int:
    if not 1 <= args.n_min <= args.n_max:
        raise BadRange(f"need 1 <= n_min <= n_max, got {args.n_min}..{args.n_max}")
    if args.samples < 2:
        raise BadRange("--samples must be >= 2")
    cfg = _load(args)
    root = Stream(cfg["run"]["master_seed"], (_KN_KEY,))
    print(f"{'N':>4}  {'k_N(quad)':>10}  {'k_N(MC)':>10}  {'std_err':>9}")
    for n in range(args.n_min, args.n_max + 1):
        est, se = analysis.k_N_estimate(n, args.samples, root.child(n).generator(0, Purpose.VERIFY))
        print(f"{n:>4d}  {analysis.k_N(n):>10.6f}  {est:>10.6f}  {se:>9.6f}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "plot": cmd_plot, "kn": cmd_kn}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BadRange, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())
