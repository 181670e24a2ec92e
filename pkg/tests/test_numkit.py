import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from obsbandit import numkit
from obsbandit.errors import DimensionMismatch, NotPositiveDefinite

from conftest import random_spd

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(numkit.cholesky(np.eye(3)), np.eye(3))

    def test_known_2x2(self):
        # [[4, 2], [2, 5]] = L L^T with L = [[2, 0], [1, 2]]
        np.testing.assert_allclose(numkit.cholesky([[4.0, 2.0], [2.0, 5.0]]), [[2.0, 0.0], [1.0, 2.0]])

    def test_rank_deficient_psd_clamped(self):
        v = np.array([1.0, 2.0, -1.0])
        m = np.outer(v, v)
        L = numkit.cholesky(m)
        np.testing.assert_allclose(L @ L.T, m, atol=1e-12)
        assert np.allclose(np.triu(L, 1), 0.0)

    def test_singular_rejected_when_strict(self):
        with pytest.raises(NotPositiveDefinite):
            numkit.cholesky(np.diag([1.0, 0.0]), allow_singular=False)

    def test_indefinite_raises(self):
        with pytest.raises(NotPositiveDefinite):
            numkit.cholesky(np.diag([1.0, -1e-6]))

    def test_tiny_negative_pivot_clamped(self):
        L = numkit.cholesky(np.diag([1.0, -1e-12]))
        np.testing.assert_allclose(L, np.diag([1.0, 0.0]))

    def test_non_square(self):
        with pytest.raises(DimensionMismatch):
            numkit.cholesky(np.ones((2, 3)))

    @given(arrays(float, (4, 4), elements=finite))
    def test_reconstructs_spd(self, m):
        spd = m @ m.T + 0.1 * np.eye(4)
        L = numkit.cholesky(spd)
        np.testing.assert_allclose(L @ L.T, spd, rtol=1e-10, atol=1e-10)


class TestUpdateAndSolve:
    @given(arrays(float, (5, 5), elements=finite), arrays(float, 5, elements=finite))
    def test_rank_one_update_matches_refactor(self, m, v):
        spd = m @ m.T + 0.5 * np.eye(5)
        L = np.linalg.cholesky(spd)
        L1 = numkit.chol_update(L, v)
        np.testing.assert_allclose(L1 @ L1.T, spd + np.outer(v, v), rtol=1e-9, atol=1e-9)
        assert np.allclose(np.triu(L1, 1), 0.0)

    def test_update_leaves_input_alone(self):
        L = np.eye(2)
        numkit.chol_update(L, [1.0, 1.0])
        np.testing.assert_array_equal(L, np.eye(2))

    def test_update_from_zero_column(self):
        L = np.diag([1.0, 0.0])
        L1 = numkit.chol_update(L, [0.0, 3.0])
        np.testing.assert_allclose(L1 @ L1.T, np.diag([1.0, 9.0]))

    def test_update_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            numkit.chol_update(np.eye(2), [1.0, 2.0, 3.0])

    def test_solve_against_dense_solver(self):
        rng = np.random.default_rng(0)
        m = random_spd(rng, 6)
        b = rng.standard_normal((6, 2))
        np.testing.assert_allclose(numkit.solve_spd(m, b), np.linalg.solve(m, b), rtol=1e-10)

    def test_solve_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            numkit.chol_solve(np.eye(3), np.ones(2))


class TestSpectral:
    def test_eig_extremes_closed_form(self):
        # eigenvalues of [[2, 1], [1, 2]] are 1 and 3
        assert numkit.eig_extremes([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx((1.0, 3.0))

    def test_sym_sqrt(self):
        rng = np.random.default_rng(1)
        m = random_spd(rng, 4)
        r = numkit.sym_sqrt(m)
        np.testing.assert_allclose(r @ r, m, rtol=1e-10)
        np.testing.assert_allclose(r, r.T)
        ri = numkit.sym_sqrt(m, inverse=True)
        np.testing.assert_allclose(ri @ m @ ri, np.eye(4), atol=1e-10)

    def test_inverse_sqrt_of_singular(self):
        with pytest.raises(NotPositiveDefinite):
            numkit.sym_sqrt(np.diag([1.0, 0.0]), inverse=True)

    def test_sym_sqrt_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            numkit.sym_sqrt(np.diag([1.0, -1.0]))


class TestProjection:
    def test_identity_case(self):
        p = numkit.Projection.onto([1.0, 0.0])
        np.testing.assert_allclose(p([3.0, 4.0]), [3.0, 0.0])

    @given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
    def test_idempotent_and_orthogonal(self, u, v):
        if np.linalg.norm(u) < 1e-3:
            return
        p = numkit.Projection.onto(u)
        P = p.matrix()
        np.testing.assert_allclose(P @ P, P, atol=1e-12)
        np.testing.assert_allclose(P, P.T)
        assert abs((v - p(v)) @ u) <= 1e-9 * (1 + np.linalg.norm(v) * np.linalg.norm(u))

    def test_zero_direction(self):
        with pytest.raises(ValueError):
            numkit.Projection.onto([0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            numkit.project(numkit.Projection.onto([1.0, 0.0]), [1.0, 2.0, 3.0])
