"""Sparse linear algebra: SPD solves and a generalized eigensolver.

Storage is scipy CSR throughout.  SPD systems given as explicit sparse
matrices are factorized once (sparse LU; the operator is solved every
time step, so the factorization is cached and reused).  Operators only
available as matrix-free actions fall back to Jacobi-preconditioned
conjugate gradients.  Every accepted solve is residual-checked.

The eigensolver wraps ARPACK shift-invert Lanczos with a fixed start
vector (runs must be reproducible bitwise) and verifies the residual
and M-orthonormality contracts before returning.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SOLVE_RTOL = 1e-12
CG_RTOL = 1e-13
EIG_RTOL = 1e-8


class LinearSolveError(RuntimeError):
    pass


class SpdSolver:
    """Cached solver for a symmetric positive definite operator.

    ``matrix`` may be a scipy sparse matrix (direct factorization) or a
    ``LinearOperator`` (conjugate gradients with the supplied or
    estimated Jacobi diagonal).
    """

    def __init__(self, matrix, jacobi_diag: np.ndarray | None = None, preconditioner=None):
        self.shape = matrix.shape
        if sp.issparse(matrix):
            self._matvec = matrix.__matmul__
            A = matrix.tocsc()
            sym = abs(A - A.T)
            if sym.nnz and sym.max() > 1e-10 * abs(A).max():
                raise LinearSolveError("operator is not symmetric")
            self._lu = spla.splu(A)
            self._mode = "direct"
        else:
            self._matvec = matrix.matvec
            if preconditioner is not None:
                self._precond = preconditioner
            else:
                if jacobi_diag is None:
                    jacobi_diag = np.ones(matrix.shape[0])
                inv_diag = 1.0 / jacobi_diag
                self._precond = lambda r: inv_diag * r
            self._mode = "cg"
            self._maxiter = 10 * matrix.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        norm_b = np.linalg.norm(b)
        if norm_b == 0.0:
            return np.zeros_like(b)
        if self._mode == "direct":
            x = self._lu.solve(b)
        else:
            P = spla.LinearOperator(self.shape, matvec=self._precond)
            op = spla.LinearOperator(self.shape, matvec=self._matvec)
            x, info = spla.cg(op, b, rtol=CG_RTOL, atol=0.0, maxiter=self._maxiter, M=P)
            if info != 0:
                raise LinearSolveError(f"cg did not converge (info={info})")
        res = np.linalg.norm(self._matvec(x) - b) / norm_b
        if res > SOLVE_RTOL:
            raise LinearSolveError(f"solve residual {res:.3e} exceeds {SOLVE_RTOL:.0e}")
        return x


def solve_spd(A, b: np.ndarray) -> np.ndarray:
    """One-shot SPD solve with the residual contract of :class:`SpdSolver`."""
    return SpdSolver(A).solve(b)


def _fix_sign(x: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(x)))
    return -x if x[k] < 0 else x


def generalized_eig_near(K, M, sigma: float, count: int):
    """Eigenpairs of K x = lambda M x closest to ``sigma``.

    Returns ``(lams, vecs)`` sorted ascending, vectors M-orthonormal
    with deterministic sign.  Raises if the residual contract
    ||K x - lambda M x|| / ||x||_M <= 1e-8 fails.
    """
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    n = K.shape[0]
    v0 = np.ones(n) / np.sqrt(n)
    try:
        lams, vecs = spla.eigsh(K, k=count, M=M, sigma=sigma, which="LM", v0=v0, maxiter=500)
    except Exception as exc:  # ARPACK failures surface as one error type
        raise LinearSolveError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(lams)
    lams = lams[order]
    vecs = vecs[:, order]
    for j in range(count):
        x = _fix_sign(vecs[:, j])
        xm = float(np.sqrt(x @ (M @ x)))
        res = np.linalg.norm(K @ x - lams[j] * (M @ x)) / xm
        if res > EIG_RTOL:
            raise LinearSolveError(
                f"eigen residual {res:.3e} exceeds {EIG_RTOL:.0e} for mode {j}"
            )
        vecs[:, j] = x / xm
    gram = vecs.T @ (M @ vecs)
    if np.max(np.abs(gram - np.eye(count))) > 1e-8:
        raise LinearSolveError("eigenvectors are not M-orthonormal")
    return lams, vecs
