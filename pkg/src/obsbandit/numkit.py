"""Small dense linear-algebra kernels.

Everything here works on plain ``numpy`` arrays.  Matrices are tiny (a few
dozen rows at most) so the emphasis is on predictable error behaviour rather
than speed: near-singular pivots are clamped, indefinite input raises, and no
routine ever forms an explicit inverse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .errors import DimensionMismatch, NonConvergence, NotPositiveDefinite

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-10

SymMatrix = np.ndarray


def sym(m) -> SymMatrix:
    """Return ``m`` as a float array, symmetrized as ``(m + m.T) / 2``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def _cholesky_clamped(m: np.ndarray, allow_singular: bool) -> np.ndarray:
    d = m.shape[0]
    L = np.zeros_like(m)
    n_clamped = 0
    for j in range(d):
        pivot = m[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -PIVOT_TOL or (not allow_singular and pivot <= PIVOT_TOL):
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at column {j}")
        if pivot <= PIVOT_TOL:
            n_clamped += 1
            continue  # column stays zero
        L[j, j] = np.sqrt(pivot)
        L[j + 1 :, j] = (m[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    if n_clamped:
        logger.debug("cholesky: clamped %d near-zero pivot(s) to 0", n_clamped)
    return L


def cholesky(m, *, allow_singular: bool = True) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Pivots in ``[-1e-10, 0]`` are clamped to zero when ``allow_singular`` is
    true (the matrix is treated as PSD); otherwise every pivot must be
    strictly positive.  A pivot below ``-1e-10`` always raises
    :class:`NotPositiveDefinite`.
    """
    m = sym(m)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return _cholesky_clamped(m, allow_singular)


def chol_update(L: np.ndarray, v) -> np.ndarray:
    """Factor of ``L @ L.T + v v^T`` computed by Givens-style rotations.

    Returns a new array; ``L`` is left untouched.
    """
    L = np.array(L, dtype=float, copy=True)
    x = np.array(v, dtype=float, copy=True)
    n = x.shape[0]
    if L.shape != (n, n):
        raise DimensionMismatch(f"factor {L.shape} vs vector ({n},)")
    for k in range(n):
        r = np.hypot(L[k, k], x[k])
        if r == 0.0:
            continue
        c = r / L[k, k] if L[k, k] != 0.0 else np.inf
        s = x[k] / L[k, k] if L[k, k] != 0.0 else np.inf
        if not np.isfinite(c):
            # zero diagonal: the column is rebuilt from x alone
            L[k, k] = r
            L[k + 1 :, k] = x[k + 1 :] * (x[k] / r)
            x[k + 1 :] = 0.0
            continue
        L[k, k] = r
        L[k + 1 :, k] = (L[k + 1 :, k] + s * x[k + 1 :]) / c
        x[k + 1 :] = c * x[k + 1 :] - s * L[k + 1 :, k]
    return L


def chol_solve(L: np.ndarray, b) -> np.ndarray:
    """Solve ``(L L^T) x = b`` given the lower factor."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != L.shape[0]:
        raise DimensionMismatch(f"factor {L.shape} vs rhs {b.shape}")
    return cho_solve((L, True), b, check_finite=False)


def solve_spd(m, b) -> np.ndarray:
    """Solve ``m x = b`` for symmetric positive definite ``m``."""
    return chol_solve(cholesky(m, allow_singular=False), b)


def eig_extremes(m) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    try:
        w = np.linalg.eigvalsh(sym(m))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    return float(w[0]), float(w[-1])


def sym_sqrt(m, *, inverse: bool = False) -> np.ndarray:
    """Symmetric square root of a PSD matrix (or of its inverse)."""
    w, V = np.linalg.eigh(sym(m))
    if w[0] < -PIVOT_TOL * max(1.0, abs(w[-1])):
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    if inverse:
        if w[0] <= 0.0:
            raise NotPositiveDefinite("cannot invert a singular matrix")
        w = 1.0 / w
    return (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class Projection:
    """Orthogonal projection onto the line spanned by ``direction``."""

    direction: np.ndarray

    @classmethod
    def onto(cls, v) -> "Projection":
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("cannot project onto the zero vector")
        return cls(v / norm)

    def matrix(self) -> np.ndarray:
        return np.outer(self.direction, self.direction)

    def __call__(self, v) -> np.ndarray:
        return project(self, v)


def project(p: Projection, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != p.direction.shape:
        raise DimensionMismatch(f"direction {p.direction.shape} vs vector {v.shape}")
    return p.direction * (p.direction @ v)
