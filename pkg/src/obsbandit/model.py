"""Bandit environment with imperfectly observed contexts.

Each round every arm ``i`` gets a latent context ``x_i ~ N(0, sigma_x)``, a
noisy observation ``y_i = A x_i + zeta_i`` with ``zeta_i ~ N(0, sigma_y)``,
and a reward ``r_i = x_i^T mu_star + psi_i`` with ``psi_i ~ N(0, gamma_r^2)``.
Given only ``y_i`` the reward is Gaussian with mean ``y_i^T eta_star`` and
variance ``gamma_ry_sq``; :func:`derive` computes those quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import numkit
from .errors import BadDimension, IndexOutOfRange, NonPositiveNoise, NotPSD
from .rng import Purpose, Stream


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    n_arms: int
    d_x: int
    d_y: int
    sensing: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    mu_star: np.ndarray
    gamma_r: float

    def __post_init__(self):
        for name in ("sensing", "sigma_x", "sigma_y", "mu_star"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @cached_property
    def sigma_x_factor(self) -> np.ndarray:
        return numkit.cholesky(self.sigma_x)

    @cached_property
    def sigma_y_factor(self) -> np.ndarray:
        return numkit.cholesky(self.sigma_y)

    def with_(self, **changes) -> "ProblemInstance":
        """Copy with some fields replaced."""
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ProblemInstance(**fields)

    def to_dict(self) -> dict:
        """Flat mapping with matrices as row-major lists."""
        return {
            "n_arms": int(self.n_arms),
            "d_x": int(self.d_x),
            "d_y": int(self.d_y),
            "sensing": self.sensing.ravel().tolist(),
            "sigma_x": self.sigma_x.ravel().tolist(),
            "sigma_y": self.sigma_y.ravel().tolist(),
            "mu_star": self.mu_star.ravel().tolist(),
            "gamma_r": float(self.gamma_r),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        d_x, d_y = int(data["d_x"]), int(data["d_y"])

        def mat(key, rows, cols):
            flat = np.asarray(data[key], dtype=float).ravel()
            if flat.size != rows * cols:
                raise BadDimension(f"{key}: expected {rows * cols} entries, got {flat.size}")
            return flat.reshape(rows, cols)

        return cls(
            n_arms=int(data["n_arms"]),
            d_x=d_x,
            d_y=d_y,
            sensing=mat("sensing", d_y, d_x),
            sigma_x=mat("sigma_x", d_x, d_x),
            sigma_y=mat("sigma_y", d_y, d_y),
            mu_star=mat("mu_star", 1, d_x).ravel(),
            gamma_r=float(data["gamma_r"]),
        )


def validate(inst: ProblemInstance) -> ProblemInstance:
    """Check dimensions, covariance definiteness and noise level.

    Raises :class:`BadDimension`, :class:`NotPSD` or :class:`NonPositiveNoise`.
    """
    if inst.n_arms < 1 or inst.d_x < 1 or inst.d_y < 1:
        raise BadDimension("n_arms, d_x and d_y must all be >= 1")
    expected = {
        "sensing": (inst.d_y, inst.d_x),
        "sigma_x": (inst.d_x, inst.d_x),
        "sigma_y": (inst.d_y, inst.d_y),
        "mu_star": (inst.d_x,),
    }
    for name, shape in expected.items():
        got = getattr(inst, name).shape
        if got != shape:
            raise BadDimension(f"{name} has shape {got}, expected {shape}")
    for name in ("sigma_x", "sigma_y"):
        m = getattr(inst, name)
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise NotPSD(f"{name} is not symmetric")
    numkit.cholesky(inst.sigma_x)  # PSD
    numkit.cholesky(inst.sigma_y, allow_singular=False)
    if not inst.gamma_r > 0:
        raise NonPositiveNoise(f"gamma_r must be positive, got {inst.gamma_r}")
    return inst


@dataclass(frozen=True, eq=False)
class DerivedParams:
    s_y: np.ndarray
    decoder: np.ndarray
    eta_star: np.ndarray
    gamma_ry_sq: float
    s_y_chol: np.ndarray
    whitening: np.ndarray  # symmetric S_y^{-1/2}
    lambda_s1: float
    lambda_s2: float
    lambda_a1: float
    lambda_a2: float
    lambda_y1: float
    lambda_y2: float
    posterior_cov: np.ndarray = field(repr=False)

    @property
    def gamma_ry(self) -> float:
        return float(np.sqrt(self.gamma_ry_sq))

    @property
    def signal_var(self) -> float:
        """Variance of ``y^T eta_star`` for a single arm."""
        return float(self.eta_star @ self.s_y @ self.eta_star)


def derive(inst: ProblemInstance) -> DerivedParams:
    """Conditional-reward parameters of a validated instance.

    Requires ``sigma_x`` strictly positive definite because the decoder
    involves its inverse.
    """
    validate(inst)
    A = inst.sensing
    try:
        lx = numkit.cholesky(inst.sigma_x, allow_singular=False)
    except NotPSD as exc:
        raise NotPSD(f"sigma_x must be positive definite for derive(): {exc}") from None
    ly = numkit.cholesky(inst.sigma_y, allow_singular=False)

    sy_inv_A = numkit.chol_solve(ly, A)  # Sigma_y^{-1} A
    sx_inv = numkit.chol_solve(lx, np.eye(inst.d_x))
    precision = numkit.sym(A.T @ sy_inv_A + sx_inv)
    lp = numkit.cholesky(precision, allow_singular=False)
    decoder = numkit.chol_solve(lp, sy_inv_A.T)
    posterior_cov = numkit.sym(numkit.chol_solve(lp, np.eye(inst.d_x)))
    eta_star = decoder.T @ inst.mu_star
    gamma_ry_sq = float(inst.mu_star @ posterior_cov @ inst.mu_star + inst.gamma_r**2)

    signal_cov = numkit.sym(A @ inst.sigma_x @ A.T)
    s_y = numkit.sym(signal_cov + inst.sigma_y)
    ls1, ls2 = numkit.eig_extremes(s_y)
    la1, la2 = numkit.eig_extremes(signal_cov)
    ly1, ly2 = numkit.eig_extremes(inst.sigma_y)
    return DerivedParams(
        s_y=s_y,
        decoder=decoder,
        eta_star=eta_star,
        gamma_ry_sq=gamma_ry_sq,
        s_y_chol=numkit.cholesky(s_y, allow_singular=False),
        whitening=numkit.sym_sqrt(s_y, inverse=True),
        lambda_s1=ls1,
        lambda_s2=ls2,
        lambda_a1=la1,
        lambda_a2=la2,
        lambda_y1=ly1,
        lambda_y2=ly2,
        posterior_cov=posterior_cov,
    )


@dataclass(frozen=True, eq=False)
class RoundSample:
    contexts: np.ndarray  # (N, d_x)
    observations: np.ndarray  # (N, d_y)
    reward_noises: np.ndarray  # (N,)

    @property
    def n_arms(self) -> int:
        return self.observations.shape[0]


def sample_round(inst: ProblemInstance, stream: Stream, t: int) -> RoundSample:
    """Draw contexts, observations and reward noise for every arm at round ``t``.

    Each quantity comes from its own ``(t, purpose)`` address of ``stream``, so
    the result depends only on the stream and ``t``.
    """
    n = inst.n_arms
    z = stream.standard_normal(t, Purpose.CONTEXT, (n, inst.d_x))
    w = stream.standard_normal(t, Purpose.OBSERVATION_NOISE, (n, inst.d_y))
    u = stream.standard_normal(t, Purpose.REWARD_NOISE, n)
    contexts = z @ inst.sigma_x_factor.T
    observations = contexts @ inst.sensing.T + w @ inst.sigma_y_factor.T
    return RoundSample(contexts, observations, inst.gamma_r * u)


def sample_batch(inst: ProblemInstance, gen: np.random.Generator, n_rounds: int) -> RoundSample:
    """Many independent rounds at once, arrays gain a leading round axis.

    Used by the Monte Carlo verifiers, which need i.i.d. rounds but not
    round-addressable streams.
    """
    n = inst.n_arms
    contexts = gen.standard_normal((n_rounds, n, inst.d_x)) @ inst.sigma_x_factor.T
    noise = gen.standard_normal((n_rounds, n, inst.d_y)) @ inst.sigma_y_factor.T
    observations = contexts @ inst.sensing.T + noise
    psi = inst.gamma_r * gen.standard_normal((n_rounds, n))
    return RoundSample(contexts, observations, psi)


def reward(sample: RoundSample, arm: int, mu_star) -> float:
    """Realized reward of ``arm`` (0-based)."""
    if not 0 <= arm < sample.n_arms:
        raise IndexOutOfRange(f"arm {arm} not in [0, {sample.n_arms})")
    return float(sample.contexts[arm] @ np.asarray(mu_star, dtype=float) + sample.reward_noises[arm])


def default_instance(n_arms: int, d_x: int, d_y: int, stream: Stream, gamma_r: float = 1.0) -> ProblemInstance:
    """Isotropic experiment instance.

    ``sigma_x = I``, ``sigma_y = I``, sensing entries i.i.d. ``N(0, 1/d_y)``
    (so ``E||A x||^2 = d_x`` whatever the observation dimension),
    ``mu_star`` uniform on the sphere of radius ``sqrt(d_x)``.  The random
    parts depend only on ``(d_x, d_y)`` and ``stream``, so instances with the
    same dimensions but different arm counts share ``A`` and ``mu_star``.
    """
    gen = stream.child(d_x, d_y).generator(0, Purpose.INSTANCE)
    A = gen.standard_normal((d_y, d_x)) / np.sqrt(d_y)
    u = gen.standard_normal(d_x)
    mu = np.sqrt(d_x) * u / np.linalg.norm(u)
    return ProblemInstance(
        n_arms=n_arms,
        d_x=d_x,
        d_y=d_y,
        sensing=A,
        sigma_x=np.eye(d_x),
        sigma_y=np.eye(d_y),
        mu_star=mu,
        gamma_r=gamma_r,
    )
