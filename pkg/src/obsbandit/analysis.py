"""Theory constants, regret envelope, and Monte Carlo checks of the bounds.

Every verifier returns a :class:`BoundReport` (or a list of them) of the
form ``lhs <= rhs * (1 + tolerance)`` so a report can be re-checked from its
own fields.  Monte Carlo slack (a few standard errors) is folded into ``rhs``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special, stats

from . import numkit
from .errors import BadDelta, InsufficientReplicates, ZeroDirection, ZeroSignal
from .model import DerivedParams, sample_batch
from .policy import RegretTrace, init_state
from .rng import Purpose

PHI0 = 1.0 / math.sqrt(2.0 * math.pi)
_CHUNK = 100_000


@dataclass(frozen=True)
class BoundReport:
    name: str
    holds: bool
    lhs: float
    rhs: float
    samples: int
    tolerance: float = 0.0

    @classmethod
    def check(cls, name: str, lhs: float, rhs: float, samples: int, tolerance: float = 0.0) -> "BoundReport":
        lhs, rhs = float(lhs), float(rhs)
        return cls(name, bool(lhs <= rhs * (1.0 + tolerance)), lhs, rhs, int(samples), float(tolerance))

    def recheck(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.tolerance)

    def to_row(self) -> str:
        return f"{self.name},{str(self.holds).lower()},{self.lhs:.10g},{self.rhs:.10g},{self.samples},{self.tolerance:.10g}"


REPORT_HEADER = "name,holds,lhs,rhs,samples,tolerance"


def format_reports(reports: Iterable[BoundReport]) -> str:
    return "\n".join([REPORT_HEADER, *(r.to_row() for r in reports)]) + "\n"


# ---------------------------------------------------------------------------
# constants


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 0.25:
        raise BadDelta(f"delta must lie in (0, 0.25), got {delta}")


def v_T(n_arms: int, d_y: int, horizon: int, delta: float) -> float:
    """Truncation level ``sqrt(2 log(N d_y T / delta))``."""
    _check_delta(delta)
    if min(n_arms, d_y, horizon) < 1:
        raise ValueError("n_arms, d_y and horizon must be >= 1")
    return math.sqrt(2.0 * math.log(n_arms * d_y * horizon / delta))


def t_star(n_arms: int, d_y: int, horizon: int, delta: float) -> float:
    """Burn-in round after which the eigenvalue lower bound is effective."""
    v = v_T(n_arms, d_y, horizon, delta)
    return 128.0 * v**4 * math.log(d_y * horizon / delta) + 1.0


def _kn_integrand(x: float, n: int) -> float:
    # N x^2 phi(x) Phi(x)^(N-1), computed in log space for the CDF power
    if n == 1:
        return x * x * PHI0 * math.exp(-0.5 * x * x)
    return n * x * x * PHI0 * math.exp(-0.5 * x * x + (n - 1) * special.log_ndtr(x))


@lru_cache(maxsize=None)
def k_N(n_arms: int) -> float:
    """``E[(max of N standard normals)^2]`` by adaptive quadrature on [-12, 12]."""
    if n_arms < 1:
        raise ValueError("n_arms must be >= 1")
    val, _ = integrate.quad(_kn_integrand, -12.0, 12.0, args=(n_arms,), epsabs=1e-11, epsrel=1e-10, limit=500)
    return float(val)


def k_N_estimate(n_arms: int, n_samples: int, gen: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of ``k_N`` and its standard error."""
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        sq = gen.standard_normal((m, n_arms)).max(axis=1) ** 2
        total += sq.sum()
        total_sq += (sq * sq).sum()
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / max(n_samples - 1, 1))


@dataclass(frozen=True)
class TheoryConstants:
    n_arms: int
    d_y: int
    horizon: int
    delta: float
    v_T: float
    k_N: float
    t_star: float


def theory_constants(n_arms: int, d_y: int, horizon: int, delta: float) -> TheoryConstants:
    return TheoryConstants(
        n_arms=n_arms,
        d_y=d_y,
        horizon=horizon,
        delta=delta,
        v_T=v_T(n_arms, d_y, horizon, delta),
        k_N=k_N(n_arms),
        t_star=t_star(n_arms, d_y, horizon, delta),
    )


# ---------------------------------------------------------------------------
# regret envelope


def envelope_shape(T_grid, constants: TheoryConstants, derived: DerivedParams) -> np.ndarray:
    """Envelope with unit constant, evaluated at each horizon in ``T_grid``."""
    T = np.asarray(T_grid, dtype=float)
    N, d, delta = constants.n_arms, constants.d_y, constants.delta
    ratio = (derived.lambda_a2 + derived.lambda_y2) * derived.gamma_ry / (derived.lambda_a1 + derived.lambda_y1)
    return ratio * N * d**1.5 * np.log(N * d * T / delta) ** 2.5 * np.log(d * T / delta)


def regret_envelope(T_grid, constants: TheoryConstants, derived: DerivedParams, fitted_C: float) -> np.ndarray:
    if fitted_C < 0:
        raise ValueError("fitted_C must be non-negative")
    return fitted_C * envelope_shape(T_grid, constants, derived)


def fit_envelope_constant(T_grid, regret, constants: TheoryConstants, derived: DerivedParams) -> float:
    """Least-squares constant ``C`` for ``regret ~ C * envelope_shape``."""
    g = envelope_shape(T_grid, constants, derived)
    r = np.asarray(regret, dtype=float)
    return float(g @ r / (g @ g))


# ---------------------------------------------------------------------------
# truncation event


def truncation_maxima(inst, derived: DerivedParams, horizon: int, n_reps: int, stream) -> np.ndarray:
    """Largest whitened observation component over a full horizon, per replicate."""
    out = np.empty(n_reps)
    for rep in range(n_reps):
        gen = stream.child(rep).generator(0, Purpose.VERIFY)
        obs = sample_batch(inst, gen, horizon).observations
        out[rep] = np.abs(obs @ derived.whitening).max()  # whitening is symmetric
    return out


def verify_truncation(inst, derived, horizon, delta, n_reps, stream, *, maxima=None) -> BoundReport:
    """Empirical ``P(W_T) >= 1 - delta - 2 se``, phrased as failure rate <= delta + 2 se."""
    v = v_T(inst.n_arms, inst.d_y, horizon, delta)
    if maxima is None:
        maxima = truncation_maxima(inst, derived, horizon, n_reps, stream)
    n = len(maxima)
    fail = float(np.mean(maxima > v))
    se = math.sqrt(fail * (1.0 - fail) / n)
    return BoundReport.check(f"truncation[delta={delta:g}]", fail, delta + 2.0 * se, n)


def truncation_failure_exact_single(v: float) -> float:
    """``P(|Z| > v)`` for one standard normal (the T = N = d_y = 1 case)."""
    return float(special.erfc(v / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# conditional second moment of the chosen observation


def moment_target(derived: DerivedParams, eta_hat, kn: float) -> np.ndarray:
    """``P (k_N - 1) + I`` with ``P`` the projection onto ``S_y^{1/2} eta_hat``."""
    direction = numkit.sym_sqrt(derived.s_y) @ np.asarray(eta_hat, dtype=float)
    P = numkit.Projection.onto(direction).matrix()
    return (kn - 1.0) * P + np.eye(len(direction))


def conditional_second_moment(derived: DerivedParams, eta_hat, n_arms: int, n_samples: int, gen) -> np.ndarray:
    """Mean of ``S_y^{-1/2} y_a y_a^T S_y^{-1/2}`` with ``a`` the greedy arm for fixed ``eta_hat``.

    Observations are drawn from their marginal law ``N(0, S_y)``.
    """
    eta_hat = np.asarray(eta_hat, dtype=float)
    if not np.any(eta_hat):
        raise ZeroDirection("eta_hat must be nonzero")
    d = len(eta_hat)
    acc = np.zeros((d, d))
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        y = gen.standard_normal((m, n_arms, d)) @ derived.s_y_chol.T
        a = np.argmax(y @ eta_hat, axis=1)
        w = y[np.arange(m), a] @ derived.whitening
        acc += w.T @ w
        done += m
    return acc / n_samples


def verify_conditional_moment(
    derived: DerivedParams, eta_hat, n_arms: int, n_samples: int, gen, *, tol_per_dim: float = 0.05, moment=None
) -> BoundReport:
    """Frobenius distance of the empirical moment to ``P (k_N - 1) + I``."""
    d = len(eta_hat)
    if moment is None:
        moment = conditional_second_moment(derived, eta_hat, n_arms, n_samples, gen)
    err = np.linalg.norm(moment - moment_target(derived, eta_hat, k_N(n_arms)))
    return BoundReport.check(f"conditional_moment[N={n_arms}]", err, tol_per_dim * d, n_samples)


def verify_moment_trace(moment: np.ndarray, n_arms: int, n_samples: int, *, tol_per_dim: float = 0.02) -> BoundReport:
    """``trace = d_y + k_N - 1`` within ``tol_per_dim * d_y``."""
    d = moment.shape[0]
    err = abs(np.trace(moment) - (d + k_N(n_arms) - 1.0))
    return BoundReport.check(f"moment_trace[N={n_arms}]", err, tol_per_dim * d, n_samples)


# ---------------------------------------------------------------------------
# eigenvalue growth of the Gram matrix


def gram_growth_bound(t, derived: DerivedParams, n_arms: int, horizon: int, delta: float) -> np.ndarray:
    """Lower bound on ``lambda_min(B(t))``; negative where the bound is vacuous."""
    t = np.asarray(t, dtype=float)
    v = v_T(n_arms, derived.s_y.shape[0], horizon, delta)
    log_term = math.log(derived.s_y.shape[0] * horizon / delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        radical = np.sqrt(32.0 * v**4 * log_term / (t - 1.0))
        bound = derived.lambda_s1 * (t - 1.0) * (1.0 - radical)
    return np.where(t <= 1.0, 0.0, bound)


def verify_gram_growth(min_eigs, derived: DerivedParams, n_arms: int, horizon: int, delta: float) -> BoundReport:
    """Checks ``lambda_min(B(t)) >= bound(t)`` for every round of one trace.

    ``lhs`` is the largest ratio ``bound / lambda_min`` over rounds where the
    bound is positive (zero if it never is); the inequality holds iff ``lhs <= 1``.
    """
    min_eigs = np.asarray(min_eigs, dtype=float)
    t = np.arange(1, len(min_eigs) + 1)
    bound = gram_growth_bound(t, derived, n_arms, horizon, delta)
    active = bound > 0
    worst = float(np.max(bound[active] / min_eigs[active])) if active.any() else 0.0
    return BoundReport.check("gram_growth", worst, 1.0, len(min_eigs))


def verify_desk_growth(whitened_min_eigs, *, rate: float = 0.5, t_from: int = 200) -> BoundReport:
    """``lambda_min(S_y^{-1/2} B(t) S_y^{-1/2}) >= rate (t - 1)`` for ``t >= t_from``."""
    lam = np.asarray(whitened_min_eigs, dtype=float)
    t = np.arange(1, len(lam) + 1)
    sel = t >= t_from
    worst = float(np.max(rate * (t[sel] - 1) / lam[sel])) if sel.any() else 0.0
    return BoundReport.check(f"desk_growth[rate={rate:g}]", worst, 1.0, int(sel.sum()))


# ---------------------------------------------------------------------------
# estimator tail


def estimator_tail_bound(eps, gram, gamma_ry_sq: float) -> np.ndarray:
    gram = np.asarray(gram, dtype=float)
    d = gram.shape[0]
    lam = 1.0 / numkit.eig_extremes(gram)[0]  # lambda_max(B^{-1})
    eps = np.asarray(eps, dtype=float)
    return 2.0 * np.exp(-(eps**2) / (2.0 * d * lam * gamma_ry_sq))


def chi_exceedance(eps, c: float, d: int, gamma_ry_sq: float) -> np.ndarray:
    """``P(||eta_hat - eta_star|| > eps)`` when the error is ``N(0, gamma_ry_sq / c * I)``."""
    return stats.chi.sf(np.asarray(eps, dtype=float) * math.sqrt(c / gamma_ry_sq), d)


def estimator_errors(design, prior, eta_star, gamma_ry_sq: float, n_reps: int, gen) -> np.ndarray:
    """Norm of ``eta_hat - eta_star`` after replaying a fixed design ``n_reps`` times.

    Rewards follow the conditional law ``N(y^T eta_star, gamma_ry_sq)``, and the
    initial estimate is drawn from ``N(eta_star, gamma_ry_sq * prior^{-1})`` so
    that the final estimate is exactly ``N(eta_star, gamma_ry_sq * B^{-1})``.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    eta_star = np.asarray(eta_star, dtype=float)
    prior = numkit.sym(prior)
    gamma = math.sqrt(gamma_ry_sq)
    prior_cov_factor = numkit.cholesky(numkit.chol_solve(numkit.cholesky(prior, allow_singular=False), np.eye(len(eta_star))))
    means = design @ eta_star
    out = np.empty(n_reps)
    for rep in range(n_reps):
        eta_init = eta_star + gamma * prior_cov_factor @ gen.standard_normal(len(eta_star))
        state = init_state(prior, eta_init)
        rewards = means + gamma * gen.standard_normal(len(means))
        for y, r in zip(design, rewards):
            state.update(y, r)
        out[rep] = np.linalg.norm(state.eta_hat - eta_star)
    return out


def verify_estimator_tail(
    design, prior, eta_star, gamma_ry_sq: float, epsilons: Sequence[float], n_reps: int, gen, *, n_se: float = 3.0, errors=None
) -> list[BoundReport]:
    """One report per ``eps``: exceedance frequency <= tail bound + ``n_se`` binomial se."""
    if n_reps < 1000:
        raise InsufficientReplicates(f"need at least 1000 replicates, got {n_reps}")
    design = np.atleast_2d(np.asarray(design, dtype=float))
    gram = numkit.sym(prior) + design.T @ design
    if errors is None:
        errors = estimator_errors(design, prior, eta_star, gamma_ry_sq, n_reps, gen)
    reports = []
    for eps, bound in zip(epsilons, estimator_tail_bound(epsilons, gram, gamma_ry_sq)):
        freq = float(np.mean(errors > eps))
        se = math.sqrt(freq * (1.0 - freq) / len(errors))
        reports.append(BoundReport.check(f"estimator_tail[eps={eps:.6g}]", freq, bound + n_se * se, len(errors)))
    return reports


def verify_estimator_chi(
    errors, epsilons: Sequence[float], c: float, d: int, gamma_ry_sq: float, *, n_se: float = 3.0
) -> list[BoundReport]:
    """For a ``c I`` Gram matrix: exceedance frequency within ``n_se`` se of the chi law."""
    errors = np.asarray(errors, dtype=float)
    n = len(errors)
    reports = []
    for eps, p in zip(epsilons, chi_exceedance(epsilons, c, d, gamma_ry_sq)):
        freq = float(np.mean(errors > eps))
        se = math.sqrt(p * (1.0 - p) / n)
        reports.append(BoundReport.check(f"estimator_chi[eps={eps:.6g}]", abs(freq - p), n_se * se, n))
    return reports


# ---------------------------------------------------------------------------
# suboptimal-arm probability


def suboptimal_bound(derived: DerivedParams, n_arms: int, lambda_t, horizon: int, delta: float) -> np.ndarray:
    """Upper bound on ``P(a* != a | B(t))`` given ``lambda_t = lambda_max(B(t)^{-1})`` (unclipped)."""
    signal = derived.signal_var
    if signal <= 0.0:
        raise ZeroSignal("eta_star^T S_y eta_star must be positive")
    d = derived.s_y.shape[0]
    v = v_T(n_arms, d, horizon, delta)
    coef = 2.0 * n_arms * math.sqrt(derived.lambda_s2) * d * v * derived.gamma_ry / math.sqrt(signal)
    return coef * np.sqrt(np.asarray(lambda_t, dtype=float))


def suboptimal_rate(derived: DerivedParams, n_arms: int, lambda_t: float, n_samples: int, gen) -> float:
    """Mismatch frequency of greedy vs. oracle with ``eta_hat ~ N(eta_star, lambda_t gamma_ry_sq I)``."""
    d = len(derived.eta_star)
    mismatches = 0
    done = 0
    scale = math.sqrt(lambda_t * derived.gamma_ry_sq)
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        y = gen.standard_normal((m, n_arms, d)) @ derived.s_y_chol.T
        eta_hat = derived.eta_star + scale * gen.standard_normal((m, d))
        a_star = np.argmax(y @ derived.eta_star, axis=1)
        a = np.argmax(np.einsum("mnd,md->mn", y, eta_hat), axis=1)
        mismatches += int(np.count_nonzero(a != a_star))
        done += m
    return mismatches / n_samples


def verify_suboptimal_prob(
    derived: DerivedParams, n_arms: int, lambda_t: float, n_samples: int, gen, *, horizon: int, delta: float, n_se: float = 3.0
) -> BoundReport:
    rate = suboptimal_rate(derived, n_arms, lambda_t, n_samples, gen)
    se = math.sqrt(rate * (1.0 - rate) / n_samples)
    bound = min(1.0, float(suboptimal_bound(derived, n_arms, lambda_t, horizon, delta)))
    return BoundReport.check(f"suboptimal_prob[N={n_arms},lambda={lambda_t:g}]", rate, bound + n_se * se, n_samples)


# ---------------------------------------------------------------------------
# gap between the two largest of N standard normals


def top_two_gaps(n_arms: int, n_samples: int, gen) -> np.ndarray:
    if n_arms < 2:
        raise ValueError("need at least two variables for a gap")
    out = np.empty(n_samples)
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        z = np.partition(gen.standard_normal((m, n_arms)), n_arms - 2, axis=1)
        out[done : done + m] = z[:, -1] - z[:, -2]
        done += m
    return out


def gap_histogram(gaps, bin_width: float = 0.05):
    """Density histogram on ``[0, max]``; returns ``(edges, density, counts)``."""
    n_bins = max(1, int(math.ceil(gaps.max() / bin_width)))
    edges = np.arange(n_bins + 1) * bin_width
    counts, _ = np.histogram(gaps, bins=edges)
    density = counts / (len(gaps) * bin_width)
    return edges, density, counts


def gap_density(d, n_arms: int) -> np.ndarray:
    """Density of the top-two gap by quadrature over the runner-up value."""
    def f(x, dd):
        return n_arms * (n_arms - 1) * PHI0**2 * math.exp(-0.5 * (x + dd) ** 2 - 0.5 * x * x + (n_arms - 2) * special.log_ndtr(x))

    d = np.atleast_1d(np.asarray(d, dtype=float))
    return np.array([integrate.quad(f, -12.0, 12.0, args=(dd,), epsabs=1e-12, limit=200)[0] for dd in d])


def gap_density_two(d) -> np.ndarray:
    """Closed form for ``N = 2``: ``|Z1 - Z2|`` is half-normal with scale sqrt(2)."""
    d = np.asarray(d, dtype=float)
    return np.where(d >= 0, np.exp(-(d**2) / 4.0) / math.sqrt(math.pi), 0.0)


def gap_bin_mass_two(edges) -> np.ndarray:
    """Exact bin-averaged density of the ``N = 2`` gap over histogram ``edges``."""
    edges = np.asarray(edges, dtype=float)
    cdf = special.erf(edges / 2.0)
    return np.diff(cdf) / np.diff(edges)


def verify_gap_density(
    n_arms: int, n_samples: int, gen, *, bin_width: float = 0.05, min_hits: int = 100, tolerance: float = 0.05, gaps=None
) -> BoundReport:
    """Histogram density of the top-two gap against ``N phi(0)``."""
    if gaps is None:
        gaps = top_two_gaps(n_arms, n_samples, gen)
    _, density, counts = gap_histogram(gaps, bin_width)
    dense = counts >= min_hits
    peak = float(density[dense].max()) if dense.any() else 0.0
    return BoundReport.check(f"gap_density[N={n_arms}]", peak, n_arms * PHI0, len(gaps), tolerance)


def verify_gap_closed_form(gaps, *, bin_width: float = 0.05, upper: float = 3.0, tol: float = 0.02) -> BoundReport:
    """``N = 2``: sup-norm distance of the histogram to the exact bin-averaged density on ``[0, upper]``."""
    gaps = np.asarray(gaps, dtype=float)
    edges, density, _ = gap_histogram(gaps, bin_width)
    keep = edges[1:] <= upper + 1e-12
    err = float(np.max(np.abs(density[keep] - gap_bin_mass_two(edges[: keep.sum() + 1]))))
    return BoundReport.check("gap_closed_form[N=2]", err, tol, len(gaps))


# ---------------------------------------------------------------------------
# weighted indicator sum


def indicator_sum_terms(trace: RegretTrace, derived, n_arms, horizon, delta, t_from):
    """``(lhs, rhs)`` of the weighted mistake-count inequality for one trace.

    The conditional mistake probabilities are replaced by the (clipped)
    suboptimal-arm bound at the realized ``lambda_t = 1 / lambda_min(B(t))``.
    """
    if trace.gram_min_eig is None:
        raise ValueError("trace was recorded without eigen diagnostics")
    t = np.arange(1, trace.horizon + 1)
    sel = (t >= max(t_from, 2))
    w = 1.0 / np.sqrt(t[sel] - 1.0)
    lhs = float(np.sum(w * trace.suboptimal_flags[sel]))
    if derived.signal_var > 0.0:
        prob = np.minimum(1.0, suboptimal_bound(derived, n_arms, 1.0 / trace.gram_min_eig[sel], horizon, delta))
    else:
        prob = np.ones(int(sel.sum()))
    rhs = math.sqrt(32.0 * math.log(horizon) * math.log(horizon / delta)) + float(np.sum(w * prob))
    return lhs, rhs


def verify_indicator_sum(
    traces: Sequence[RegretTrace], derived, n_arms: int, horizon: int, delta: float, *, t_from: int = 200
) -> BoundReport:
    """Fraction of traces violating the inequality must be <= delta + 2 se."""
    _check_delta(delta)
    fails = 0
    for tr in traces:
        lhs, rhs = indicator_sum_terms(tr, derived, n_arms, horizon, delta, t_from)
        fails += lhs > rhs
    n = len(traces)
    frac = fails / n
    return BoundReport.check("indicator_sum", frac, delta + 2.0 * math.sqrt(delta * (1.0 - delta) / n), n)
