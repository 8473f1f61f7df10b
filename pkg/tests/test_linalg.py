import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qiwave.linalg import LinearSolveError, SpdSolver, generalized_eig_near, solve_spd

RNG = np.random.default_rng(5150)


def test_identity_solve():
    A = sp.identity(7, format="csr")
    b = RNG.standard_normal(7)
    assert np.allclose(solve_spd(A, b), b)


def test_two_by_two_hand_solve():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    x = solve_spd(A, np.array([1.0, 1.0]))
    assert np.allclose(x, [1 / 3, 1 / 3], atol=1e-14)


def test_random_spd_residual_contract():
    B = RNG.standard_normal((50, 50))
    A = sp.csr_matrix(B.T @ B + np.eye(50))
    b = RNG.standard_normal(50)
    x = solve_spd(A, b)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-12


def test_nonsymmetric_rejected():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(LinearSolveError):
        SpdSolver(A)


def test_zero_rhs_short_circuits():
    A = sp.identity(4, format="csr")
    assert np.all(SpdSolver(A).solve(np.zeros(4)) == 0.0)


def test_matrix_free_cg_mode():
    B = RNG.standard_normal((40, 40))
    dense = B.T @ B + 40 * np.eye(40)
    op = spla.LinearOperator((40, 40), matvec=lambda x: dense @ x)
    solver = SpdSolver(op, jacobi_diag=np.diag(dense))
    b = RNG.standard_normal(40)
    x = solver.solve(b)
    assert np.linalg.norm(dense @ x - b) / np.linalg.norm(b) <= 1e-12


def test_spmv_matches_dense():
    for _ in range(5):
        dense = RNG.standard_normal((30, 30))
        dense[np.abs(dense) < 1.0] = 0.0
        A = sp.csr_matrix(dense)
        x = RNG.standard_normal(30)
        assert np.max(np.abs(A @ x - dense @ x)) <= 1e-13


def dirichlet_laplacian(n):
    h = 1.0 / (n + 1)
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    K = sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2
    M = sp.identity(n, format="csr")
    return K, M


def test_tridiagonal_laplacian_spectrum():
    # oracle: dense eigendecomposition of the same discrete operator
    n = 50
    K, M = dirichlet_laplacian(n)
    lams, vecs = generalized_eig_near(K, M, sigma=0.0, count=4)
    dense = np.sort(np.linalg.eigvalsh(K.toarray()))
    assert np.allclose(lams, dense[:4], rtol=1e-10)
    # the discrete ground eigenvalue is within 1% of pi^2
    assert abs(lams[0] - np.pi**2) / np.pi**2 <= 0.01


def test_equal_matrices_give_unit_eigenvalues():
    B = RNG.standard_normal((25, 25))
    A = sp.csr_matrix(B.T @ B + 25 * np.eye(25))
    lams, _ = generalized_eig_near(A, A, sigma=0.9, count=3)
    assert np.allclose(lams, 1.0, atol=1e-10)


def test_eigenvectors_m_orthonormal_and_deterministic():
    n = 40
    K, M = dirichlet_laplacian(n)
    M = sp.csr_matrix(M * (1.0 / (n + 1)))
    l1, v1 = generalized_eig_near(K, M, sigma=0.0, count=3)
    l2, v2 = generalized_eig_near(K, M, sigma=0.0, count=3)
    assert np.array_equal(v1, v2)
    gram = v1.T @ (M @ v1)
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-8
