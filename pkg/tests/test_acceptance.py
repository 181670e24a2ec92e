"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; the lines are printed
even without ``-s``.
"""

import math
import time

import numpy as np
import pytest

from obsbandit import analysis, cli
from obsbandit.harness import ExperimentConfig, build_instance, run_cell, run_sweep, scenario_stream
from obsbandit.model import default_instance, derive, reward, sample_round
from obsbandit.policy import init_state
from obsbandit.rng import Purpose, Stream

SEED = 20230517
REPS = 100


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return _report


@pytest.fixture(scope="module")
def default_run():
    """N=10, d_y=10, d_x=20, 100 repetitions, T=2000, with eigen diagnostics."""
    cfg = ExperimentConfig(n_arms=[10], d_y=[10], repetitions=REPS, keep_traces=True, record_eigs=True)
    t0 = time.perf_counter()
    agg = run_cell(cfg, 10, 10)
    return cfg, agg, time.perf_counter() - t0


def test_c01_batch_recursive_equivalence(report):
    cfg = ExperimentConfig(n_arms=[10], d_y=[10])
    inst = build_instance(cfg, 10, 10)
    worst = 0.0
    t0 = time.perf_counter()
    for rep in range(100):
        stream = scenario_stream(cfg, 10, 10, rep)
        state = init_state(dim=10)
        Y, r = [], []
        for t in range(1, 501):
            if t in (50, 500):
                Ya, ra = np.array(Y), np.array(r)
                direct = np.linalg.solve(np.eye(10) + Ya.T @ Ya, Ya.T @ ra)
                worst = max(worst, np.linalg.norm(state.eta_hat - direct) / np.linalg.norm(direct))
            smp = sample_round(inst, stream, t)
            a = state.select(smp.observations)
            y, rr = smp.observations[a], reward(smp, a, inst.mu_star)
            state.update(y, rr)
            Y.append(y)
            r.append(rr)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed <= 60
    report(1, ok, f"max relative l2 error {worst:.2e} (<= 1e-8), {elapsed:.1f}s (<= 60s)")


def test_c02_zero_regret_degenerate(report):
    t0 = time.perf_counter()
    single = run_sweep(ExperimentConfig(n_arms=[1], d_y=[10], repetitions=REPS, keep_traces=True))[(1, 10)]
    no_signal = run_sweep(ExperimentConfig(n_arms=[10], d_y=[10], repetitions=REPS, keep_traces=True, mu_star=[0.0] * 20))[(10, 10)]
    elapsed = time.perf_counter() - t0
    zero = all(np.all(tr.cum_regret == 0.0) for agg in (single, no_signal) for tr in agg.traces)
    counts = (len(single.traces), len(no_signal.traces), single.horizon)
    ok = zero and counts == (REPS, REPS, 2000)
    report(2, ok, f"N=1 and mu*=0 traces identically zero over {counts[0]}+{counts[1]} runs of T={counts[2]}, {elapsed:.1f}s")


def test_c03_normalized_regret_flattens(report, default_run):
    _, agg, elapsed = default_run
    mean_ratio = (agg.mean[1999] / math.log(2000)) / (agg.mean[999] / math.log(1000))
    worst_ratio = (agg.worst[1999] / math.log(2000)) / (agg.worst[999] / math.log(1000))
    ok = mean_ratio <= 1.6 and worst_ratio <= 2.0 and elapsed <= 600
    report(3, ok, f"mean ratio {mean_ratio:.3f} (<= 1.6), worst ratio {worst_ratio:.3f} (<= 2.0), {elapsed:.0f}s (<= 600s)")


def test_c04_final_regret_monotone(report):
    t0 = time.perf_counter()
    res = run_sweep(ExperimentConfig(repetitions=REPS))
    elapsed = time.perf_counter() - t0
    m = {k: v.mean[-1] for k, v in res.items()}
    along_d = [m[(10, d)] for d in (5, 20, 50)]
    along_n = [m[(n, 20)] for n in (10, 20, 50)]
    d_effect = m[(10, 50)] - m[(10, 5)]
    n_effect = m[(50, 20)] - m[(10, 20)]
    ok = (
        np.all(np.diff(along_d) > 0)
        and np.all(np.diff(along_n) > 0)
        and d_effect > n_effect
        and elapsed <= 1800
    )
    detail = (
        f"d_y row {[round(float(x), 1) for x in along_d]}, N column {[round(float(x), 1) for x in along_n]}, "
        f"d_y effect {d_effect:.1f} > N effect {n_effect:.1f}, {elapsed:.0f}s (<= 1800s)"
    )
    report(4, ok, detail)


def test_c05_truncation_event(report):
    inst = default_instance(5, 20, 3, Stream(SEED, (2, 0)))
    derived = derive(inst)
    t0 = time.perf_counter()
    maxima = analysis.truncation_maxima(inst, derived, 100, 2000, Stream(SEED, (2, 3)))
    reps = [analysis.verify_truncation(inst, derived, 100, d, 2000, None, maxima=maxima) for d in (0.05, 0.1, 0.2)]
    elapsed = time.perf_counter() - t0
    ok = all(r.holds for r in reps) and elapsed <= 120
    detail = ", ".join(f"P(W_T)={1 - r.lhs:.4f} vs {1 - r.rhs:.4f}" for r in reps)
    report(5, ok, f"{detail}, {elapsed:.1f}s (<= 120s)")


def test_c06_conditional_moment(report):
    parts, ok = [], True
    t0 = time.perf_counter()
    for n in (1, 2, 10):
        inst = default_instance(n, 20, 3, Stream(SEED, (2, 0)))
        derived = derive(inst)
        gen = Stream(SEED, (6, n)).generator(0, Purpose.VERIFY)
        moment = analysis.conditional_second_moment(derived, derived.eta_star, n, 100_000, gen)
        frob = analysis.verify_conditional_moment(derived, derived.eta_star, n, 100_000, None, moment=moment)
        tr = analysis.verify_moment_trace(moment, n, 100_000)
        ok &= frob.holds and tr.holds
        parts.append(f"N={n}: frob {frob.lhs:.4f}/{frob.rhs:.2f}, trace {tr.lhs:.4f}/{tr.rhs:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 60
    report(6, ok, f"{'; '.join(parts)}, {elapsed:.1f}s (<= 60s)")


def test_c07_kn_oracle(report):
    t0 = time.perf_counter()
    grid = (1, 2, 5, 10, 50)
    quad = [analysis.k_N(n) for n in grid]
    parts, ok = [], True
    for n, q in zip(grid, quad):
        est, se = analysis.k_N_estimate(n, 1_000_000, Stream(SEED, (7, n)).generator(0, Purpose.VERIFY))
        z = abs(est - q) / se
        ok &= z <= 4.0
        if n == 2:
            ok &= abs(est - 1.0) <= 4.0 * se
        parts.append(f"N={n}: {q:.6f} vs {est:.6f} ({z:.2f} se)")
    ok &= abs(quad[0] - 1.0) <= 1e-6
    ok &= bool(np.all(np.diff(quad) >= 0.0))
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 60
    report(7, ok, f"{'; '.join(parts)}, {elapsed:.1f}s (<= 60s)")


def test_c08_gram_growth(report, default_run):
    cfg, agg, _ = default_run
    derived = derive(build_instance(cfg, 10, 10))
    desk = [analysis.verify_desk_growth(tr.whitened_min_eig, rate=0.5, t_from=200) for tr in agg.traces]
    formal = [analysis.verify_gram_growth(tr.gram_min_eig, derived, 10, 2000, cfg.delta) for tr in agg.traces]
    n_desk = sum(r.holds for r in desk)
    n_formal = sum(r.holds for r in formal)
    t = np.arange(200, 2001)
    min_rate = min(float(np.min(tr.whitened_min_eig[199:] / (t - 1))) for tr in agg.traces)
    ok = n_desk == REPS and n_formal == REPS
    report(8, ok, f"desk growth {n_desk}/{REPS} (min lambda/(t-1) = {min_rate:.3f} >= 0.5), formal bound {n_formal}/{REPS}")


def test_c09_estimator_tail(report):
    inst = default_instance(5, 20, 3, Stream(SEED, (2, 0)))
    derived = derive(inst)
    d, c, g2 = 3, 50.0, derived.gamma_ry_sq
    eps = [k * math.sqrt(d * g2 / c) for k in (0.5, 1.0, 2.0)]
    t0 = time.perf_counter()
    gen = Stream(SEED, (9,)).generator(0, Purpose.ESTIMATOR)
    errors = analysis.estimator_errors(math.sqrt(c - 1) * np.eye(d), np.eye(d), derived.eta_star, g2, 5000, gen)
    tail = analysis.verify_estimator_tail(math.sqrt(c - 1) * np.eye(d), np.eye(d), derived.eta_star, g2, eps, 5000, None, errors=errors)
    chi = analysis.verify_estimator_chi(errors, eps, c, d, g2)
    elapsed = time.perf_counter() - t0
    ok = all(r.holds for r in tail + chi) and elapsed <= 120
    detail = "; ".join(f"eps={e:.3f}: freq {t.lhs:.4f} <= {t.rhs:.4f}, |freq-chi| {x.lhs:.4f} <= {x.rhs:.4f}" for e, t, x in zip(eps, tail, chi))
    report(9, ok, f"{detail}, {elapsed:.1f}s (<= 120s)")


def test_c10_gap_density(report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (2, 5, 10):
        gaps = analysis.top_two_gaps(n, 1_000_000, Stream(SEED, (10, n)).generator(0, Purpose.VERIFY))
        r = analysis.verify_gap_density(n, len(gaps), None, gaps=gaps)
        ok &= r.holds
        parts.append(f"N={n}: peak {r.lhs:.3f} <= {r.rhs * 1.05:.3f}")
        if n == 2:
            cf = analysis.verify_gap_closed_form(gaps)
            ok &= cf.holds
            parts.append(f"N=2 sup-norm {cf.lhs:.4f} <= 0.02")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 60
    report(10, ok, f"{'; '.join(parts)}, {elapsed:.1f}s (<= 60s)")


def test_c11_mistake_rate_decay(report, default_run):
    _, agg, _ = default_run
    better = sum(tr.suboptimal_flags[1000:].mean() < tr.suboptimal_flags[:1000].mean() for tr in agg.traces)
    report(11, better >= 95, f"late mistake rate below early rate in {better}/{REPS} scenarios (>= 95)")


def test_c12_determinism(report, tmp_path, default_run):
    cfg_text = "sweep: {n_arms: [10], d_y: [10]}\nrun: {repetitions: 100, horizon: 2000}\n"
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(cfg_text)
    _, _, base = default_run
    t0 = time.perf_counter()
    codes = [cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / k)]) for k in ("a", "b")]
    elapsed = time.perf_counter() - t0
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix in (".csv", ".svg"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    ok = codes == [0, 0] and same and len(names) == 5 and elapsed <= 2 * base
    report(12, ok, f"{len(names)} CSV/SVG files byte-identical across two runs: {same}, {elapsed:.0f}s (<= {2 * base:.0f}s)")
