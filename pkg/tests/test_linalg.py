import numpy as np
import pytest

from estguard.linalg import (DimensionError, SingularMatrixError,
                             chol_psd_check, condition_estimate, solve,
                             sym_eig)


class TestSymEig:
    def test_identity(self):
        e = sym_eig(np.eye(3))
        assert np.allclose(e.eigenvalues, [1.0, 1.0, 1.0])

    def test_diagonal(self):
        e = sym_eig(np.diag([-2.0, 5.0]))
        assert np.allclose(e.eigenvalues, [-2.0, 5.0])

    def test_two_by_two_hand_derived(self):
        # characteristic polynomial of [[2,1],[1,2]] is l^2 - 4l + 3
        e = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(e.eigenvalues, [1.0, 3.0], atol=1e-12)

    def test_ascending_order(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((9, 9))
        A = 0.5 * (A + A.T)
        w = sym_eig(A).eigenvalues
        assert np.all(np.diff(w) >= 0)

    def test_reconstruction_and_orthogonality(self):
        rng = np.random.default_rng(0)
        for n in (2, 5, 11, 20):
            A = rng.standard_normal((n, n))
            A = 0.5 * (A + A.T)
            e = sym_eig(A)
            rec = e.eigenvectors @ np.diag(e.eigenvalues) @ e.eigenvectors.T
            assert np.linalg.norm(rec - A) <= 1e-10 * np.linalg.norm(A)
            assert np.linalg.norm(e.eigenvectors.T @ e.eigenvectors
                                  - np.eye(n)) <= 1e-10

    def test_lambda_max_matches_power_iteration(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = rng.integers(2, 9)
            A = rng.standard_normal((n, n))
            A = 0.5 * (A + A.T) + (n + 1.0) * np.eye(n)  # shift positive
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            for _ in range(2000):
                w = A @ v
                v = w / np.linalg.norm(w)
            lam_pi = float(v @ A @ v)
            assert abs(sym_eig(A).eigenvalues[-1] - lam_pi) <= 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((8, 8))
        A = 0.5 * (A + A.T)
        e1, e2 = sym_eig(A), sym_eig(A)
        assert np.array_equal(e1.eigenvalues, e2.eigenvalues)
        assert np.array_equal(e1.eigenvectors, e2.eigenvectors)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            sym_eig(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestSolve:
    def test_identity(self):
        B = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(solve(np.eye(3), B), B)

    def test_scalar_scaling(self):
        assert np.allclose(solve(2.0 * np.eye(2), np.eye(2)), 0.5 * np.eye(2))

    def test_cramers_rule_oracle(self):
        # det [[4,1],[1,3]] = 11; x = (3-2)/11, y = (8-1)/11
        x = solve(np.array([[4.0, 1.0], [1.0, 3.0]]), np.array([1.0, 2.0]))
        assert np.allclose(x, [1.0 / 11.0, 7.0 / 11.0], atol=1e-14)

    def test_residual_property(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = rng.integers(2, 12)
            A = rng.standard_normal((n, n)) + n * np.eye(n)
            B = rng.standard_normal((n, 3))
            X = solve(A, B)
            assert np.linalg.norm(A @ X - B) <= 1e-8 * np.linalg.norm(B)

    def test_singular_raises_with_condition(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularMatrixError) as err:
            solve(A, np.eye(2))
        assert err.value.condition > 1e12

    def test_ill_conditioned_raises(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
        with pytest.raises(SingularMatrixError):
            solve(A, np.eye(2))

    def test_non_square_raises(self):
        with pytest.raises(DimensionError):
            solve(np.ones((2, 3)), np.ones(2))

    def test_condition_estimate_tracks_truth(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = rng.integers(2, 10)
            A = rng.standard_normal((n, n)) + n * np.eye(n)
            est = condition_estimate(A)
            true = np.linalg.cond(A, 1)
            assert est <= true * 1.01
            assert est >= true / 10.0  # lower estimate, but not wildly off


class TestCholPsdCheck:
    def test_identity_true(self):
        assert chol_psd_check(np.eye(4), 0.0) is True

    def test_negative_identity_false(self):
        assert chol_psd_check(-np.eye(3), 0.0) is False

    def test_shift_crosses_eigenvalue(self):
        # eigenvalues of [[1,2],[2,1]] are -1 and 3 (2x2 hand oracle)
        M = np.array([[1.0, 2.0], [2.0, 1.0]])
        assert chol_psd_check(M, 1.0001) is True
        assert chol_psd_check(M, 0.9999) is False

    def test_agrees_with_eigenvalues(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            n = rng.integers(1, 9)
            A = rng.standard_normal((n, n))
            A = 0.5 * (A + A.T)
            lo = sym_eig(A).eigenvalues[0]
            assert chol_psd_check(A, 0.0) == bool(lo > 0)
