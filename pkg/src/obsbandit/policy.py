"""Greedy policy with recursive least squares, oracle policy, and regret.

Arm indices are 0-based.  Ties in every argmax go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import numkit
from .errors import DimensionMismatch, IndexOutOfRange, NotPSD
from .model import DerivedParams, ProblemInstance, reward, sample_round
from .rng import Stream


class GreedyState:
    """Sufficient statistics ``B(t)`` (``gram``) and ``eta_hat`` of the Greedy policy.

    The Gram matrix is kept both densely and as a Cholesky factor; estimates
    are obtained by SPD solves against the factor.
    """

    def __init__(self, prior, eta_init):
        prior = numkit.sym(prior)
        eta_init = np.asarray(eta_init, dtype=float).ravel()
        if eta_init.shape[0] != prior.shape[0]:
            raise DimensionMismatch(f"prior {prior.shape} vs eta_init {eta_init.shape}")
        try:
            self._factor = numkit.cholesky(prior, allow_singular=False)
        except NotPSD as exc:
            raise NotPSD(f"prior must be positive definite: {exc}") from None
        self.prior_gram = prior
        self.eta_init = eta_init.copy()
        self.gram = prior.copy()
        self.eta_hat = eta_init.copy()
        self.t = 1

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    def select(self, observations) -> int:
        return select_greedy(self, observations)

    def update(self, y, r: float) -> "GreedyState":
        """Fold in the chosen arm's observation ``y`` and reward ``r``.

        ``B <- B + y y^T`` and ``eta_hat`` solves ``B_new eta = B_old eta_hat + y r``.
        """
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise DimensionMismatch(f"observation shape {y.shape}, expected ({self.dim},)")
        rhs = self.gram @ self.eta_hat + y * r
        self.gram = self.gram + np.outer(y, y)
        # Refactoring costs a few microseconds in LAPACK, well under a
        # Python-level rank-one update at these sizes.
        self._factor = numkit.cholesky(self.gram, allow_singular=False)
        self.eta_hat = numkit.chol_solve(self._factor, rhs)
        self.t += 1
        return self

    def min_eig(self) -> float:
        return numkit.eig_extremes(self.gram)[0]


def init_state(prior=None, eta_init=None, *, dim: int | None = None) -> GreedyState:
    """Initial state with ``B(1) = prior`` and ``eta_hat(1) = eta_init``.

    Missing pieces default to the identity and the zero vector of size ``dim``.
    """
    if prior is None:
        if dim is None:
            dim = len(eta_init)
        prior = np.eye(dim)
    if eta_init is None:
        eta_init = np.zeros(np.asarray(prior).shape[0])
    return GreedyState(prior, eta_init)


def _argmax_scores(observations, direction) -> int:
    observations = np.asarray(observations, dtype=float)
    if observations.ndim != 2 or observations.shape[0] < 1:
        raise DimensionMismatch(f"observations must be (N, d) with N >= 1, got {observations.shape}")
    if observations.shape[1] != direction.shape[0]:
        raise DimensionMismatch(f"observations {observations.shape} vs parameter {direction.shape}")
    return int(np.argmax(observations @ direction))  # first maximum wins


def select_greedy(state: GreedyState, observations) -> int:
    """``argmax_i y_i^T eta_hat``."""
    return _argmax_scores(observations, state.eta_hat)


def select_optimal(derived: DerivedParams, observations) -> int:
    """``argmax_i y_i^T eta_star`` (the clairvoyant choice)."""
    return _argmax_scores(observations, derived.eta_star)


def regret_increment(derived: DerivedParams, observations, a_star: int, a_chosen: int) -> float:
    observations = np.asarray(observations, dtype=float)
    n = observations.shape[0]
    for a in (a_star, a_chosen):
        if not 0 <= a < n:
            raise IndexOutOfRange(f"arm {a} not in [0, {n})")
    if a_star == a_chosen:
        return 0.0
    scores = observations @ derived.eta_star
    return float(scores[a_star] - scores[a_chosen])


@dataclass
class PolicyConfig:
    """Initial values for the Greedy state.

    ``prior`` is ``B(1)``, i.e. the inverse of the prior covariance; ``None``
    means the identity.  ``record_eigs`` stores per-round eigen diagnostics of
    ``B(t)`` in the trace.
    """

    prior: np.ndarray | None = None
    eta_init: np.ndarray | None = None
    record_eigs: bool = False


@dataclass(eq=False)
class RegretTrace:
    """Per-round record of one scenario; entry ``t-1`` describes round ``t``."""

    cum_regret: np.ndarray
    suboptimal_flags: np.ndarray
    chosen_arms: np.ndarray
    optimal_arms: np.ndarray
    # lambda_min(B(t)) and lambda_min(S_y^{-1/2} B(t) S_y^{-1/2}) before the
    # round-t update; only filled when PolicyConfig.record_eigs is set.
    gram_min_eig: np.ndarray | None = field(default=None, repr=False)
    whitened_min_eig: np.ndarray | None = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.cum_regret)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.cum_regret, prepend=0.0)


def run_scenario(
    inst: ProblemInstance,
    derived: DerivedParams,
    horizon: int,
    stream: Stream,
    config: PolicyConfig | None = None,
) -> RegretTrace:
    """Run the Greedy policy for ``horizon`` rounds and track regret."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    config = config or PolicyConfig()
    state = init_state(config.prior, config.eta_init, dim=inst.d_y)
    if state.dim != inst.d_y:
        raise DimensionMismatch(f"prior dimension {state.dim} vs d_y {inst.d_y}")

    cum = np.empty(horizon)
    flags = np.zeros(horizon, dtype=bool)
    chosen = np.empty(horizon, dtype=np.int64)
    optimal = np.empty(horizon, dtype=np.int64)
    gram_eig = np.empty(horizon) if config.record_eigs else None
    white_eig = np.empty(horizon) if config.record_eigs else None
    eta_star = derived.eta_star
    total = 0.0

    for t in range(1, horizon + 1):
        if config.record_eigs:
            gram_eig[t - 1] = np.linalg.eigvalsh(state.gram)[0]
            white_eig[t - 1] = whitened_min_eig(derived.s_y_chol, state.gram)
        sample = sample_round(inst, stream, t)
        obs = sample.observations
        a = int(np.argmax(obs @ state.eta_hat))
        scores = obs @ eta_star
        a_star = int(np.argmax(scores))
        if a != a_star:
            flags[t - 1] = True
            total += float(scores[a_star] - scores[a])
        cum[t - 1] = total
        chosen[t - 1] = a
        optimal[t - 1] = a_star
        state.update(obs[a], reward(sample, a, inst.mu_star))

    return RegretTrace(cum, flags, chosen, optimal, gram_eig, white_eig)


def whitened_min_eig(s_y_chol: np.ndarray, gram: np.ndarray) -> float:
    """``lambda_min(S_y^{-1/2} B S_y^{-1/2})`` from the Cholesky factor of ``S_y``."""
    # L^{-1} B L^{-T} is orthogonally similar to S_y^{-1/2} B S_y^{-1/2}
    half = solve_triangular(s_y_chol, gram, lower=True, check_finite=False)
    white = solve_triangular(s_y_chol, half.T, lower=True, check_finite=False)
    return float(np.linalg.eigvalsh(numkit.sym(white))[0])
