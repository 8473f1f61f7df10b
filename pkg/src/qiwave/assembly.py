"""Matrix assembly on the mapped geometry.

Gauss-Legendre quadrature per element and per direction; the 2d
collocation tables are Kronecker products of the univariate ones, so
every matrix is a sandwich ``Phi^T diag(w * factor) Phi`` with the
metric factors of the pull-backs evaluated at the tensor Gauss points.
This keeps assembly vectorized and bitwise reproducible.

The projection-coefficient matrix Theta is assembled column-blockwise
from the cached per-direction operator and sample tables: for each
breakpoint/midpoint node of the plain direction, one dense sweep matrix
covers all basis indices of the commuting direction at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .derham import DeRhamPair, divergence_matrix
from .geometry import Coefficient, GeometryMap
from .splines import (
    OPEN,
    PERIODIC,
    eval_basis_matrix,
    make_uniform_space,
)

THETA_DROP_TOL = 1e-14


@dataclass(frozen=True)
class QuadratureRule:
    """Per-direction Gauss-Legendre points on every element of [0, 1]."""

    num_elements: int
    q: int
    points: np.ndarray  # (num_elements * q,)
    weights: np.ndarray

    @classmethod
    def build(cls, num_elements: int, q: int) -> "QuadratureRule":
        nodes, weights = np.polynomial.legendre.leggauss(q)
        h = 1.0 / num_elements
        offs = (np.arange(num_elements) + 0.5) * h
        pts = (offs[:, None] + 0.5 * h * nodes[None, :]).ravel()
        wts = np.tile(0.5 * h * weights, num_elements)
        return cls(num_elements=num_elements, q=q, points=pts, weights=wts)


def _sparse_colloc(dense: np.ndarray) -> sp.csr_matrix:
    out = sp.csr_matrix(dense)
    out.eliminate_zeros()
    return out


class QuadTables:
    """Univariate collocation tables at the Gauss points of a pair."""

    def __init__(self, pair: DeRhamPair, q: tuple[int, int] | None = None):
        p1, p2 = pair.p
        if q is None:
            q = (p1 + 2, p2 + 2)
        self.pair = pair
        self.rule1 = QuadratureRule.build(pair.elements[0], q[0])
        self.rule2 = QuadratureRule.build(pair.elements[1], q[1])
        from .derham import derived_basis_matrix

        B1, dB1 = eval_basis_matrix(pair.S1, self.rule1.points, derivative=True)
        B2, dB2 = eval_basis_matrix(pair.S2, self.rule2.points, derivative=True)
        self.B1 = _sparse_colloc(B1)
        self.B2 = _sparse_colloc(B2)
        self.dB1 = _sparse_colloc(dB1)
        self.dB2 = _sparse_colloc(dB2)
        self.D1 = _sparse_colloc(derived_basis_matrix(pair.D1, self.rule1.points))
        self.D2 = _sparse_colloc(derived_basis_matrix(pair.D2, self.rule2.points))
        self.w2d = np.kron(self.rule1.weights, self.rule2.weights)

    def geometry_factors(self, geo: GeometryMap):
        x1 = self.rule1.points[:, None]
        x2 = self.rule2.points[None, :]
        j11, j12, j21, j22 = geo.jacobian(x1, x2)
        det = geo.det(x1, x2)
        return (
            np.ravel(j11),
            np.ravel(j12),
            np.ravel(j21),
            np.ravel(j22),
            np.ravel(det),
        )


def _sandwich(left: sp.csr_matrix, factor: np.ndarray, right: sp.csr_matrix) -> sp.csr_matrix:
    return (left.T @ sp.diags(factor) @ right).tocsr()


def _symmetrize(M: sp.csr_matrix) -> sp.csr_matrix:
    return ((M + M.T) * 0.5).tocsr()


def _check_mass(M: sp.csr_matrix, name: str):
    asym = abs(M - M.T)
    if asym.nnz and asym.max() > 1e-12 * abs(M).max():
        raise ValueError(f"{name} lost symmetry during assembly")
    if np.any(M.diagonal() <= 0.0):
        raise ValueError(f"{name} has a nonpositive diagonal entry")


def assemble_mass_x2(pair: DeRhamPair, geo: GeometryMap, tables: QuadTables) -> sp.csr_matrix:
    """Physical L2 mass of X2: the pull-back carries 1/det."""
    *_, det = tables.geometry_factors(geo)
    Phi = sp.kron(tables.D1, tables.D2, format="csr")
    M2 = _sandwich(Phi, tables.w2d / det, Phi)
    M2 = _symmetrize(M2)
    _check_mass(M2, "M2")
    return M2


def assemble_mass_x1(pair: DeRhamPair, geo: GeometryMap, tables: QuadTables) -> sp.csr_matrix:
    """Physical L2 mass of X1: Piola metric DF^T DF / det."""
    j11, j12, j21, j22, det = tables.geometry_factors(geo)
    g11 = (j11 * j11 + j21 * j21) / det
    g12 = (j11 * j12 + j21 * j22) / det
    g22 = (j12 * j12 + j22 * j22) / det
    P11 = sp.kron(tables.B1, tables.D2, format="csr")
    P22 = sp.kron(tables.D1, tables.B2, format="csr")
    w = tables.w2d
    M11 = _sandwich(P11, w * g11, P11)
    M22 = _sandwich(P22, w * g22, P22)
    M12 = _sandwich(P11, w * g12, P22)
    M12.eliminate_zeros()
    M = sp.bmat([[M11, M12], [M12.T, M22]], format="csr")
    M = _symmetrize(M)
    _check_mass(M, "M")
    return M


def assemble_galerkin_coupling(
    pair: DeRhamPair, geo: GeometryMap, coeff: Coefficient, tables: QuadTables
) -> sp.csr_matrix:
    """[Bc]_{i,j} = integral of b_j div(c b_i) over the physical domain.

    Everything reduces to parametric quantities: the integrand is
    b2_j (grad_par(chat) . b1_i + chat divpar(b1_i)) / det.
    """
    *_, det = tables.geometry_factors(geo)
    x1 = tables.rule1.points[:, None]
    x2 = tables.rule2.points[None, :]
    chat = np.ravel(coeff.chat(x1, x2))
    c1, c2 = coeff.chat_grad(x1, x2)
    c1 = np.ravel(np.broadcast_to(c1, (len(tables.rule1.points), len(tables.rule2.points))))
    c2 = np.ravel(np.broadcast_to(c2, (len(tables.rule1.points), len(tables.rule2.points))))
    P11 = sp.kron(tables.B1, tables.D2, format="csr")
    P22 = sp.kron(tables.D1, tables.B2, format="csr")
    P11d = sp.kron(tables.dB1, tables.D2, format="csr")
    P22d = sp.kron(tables.D1, tables.dB2, format="csr")
    Px2 = sp.kron(tables.D1, tables.D2, format="csr")
    w = tables.w2d
    Bc1 = _sandwich(P11, w * c1 / det, Px2) + _sandwich(P11d, w * chat / det, Px2)
    Bc2 = _sandwich(P22, w * c2 / det, Px2) + _sandwich(P22d, w * chat / det, Px2)
    return sp.vstack([Bc1, Bc2], format="csr")


def assemble_divdiv_direct(pair: DeRhamPair, geo: GeometryMap, tables: QuadTables):
    """Directly quadratured (A, B): independent oracle for the algebraic
    identities A = D^T M2 D, B = D^T M2.

    The divergence values come from univariate derivative evaluations,
    not from the divergence matrix.
    """
    *_, det = tables.geometry_factors(geo)
    Pdiv = sp.hstack(
        [
            sp.kron(tables.dB1, tables.D2, format="csr"),
            sp.kron(tables.D1, tables.dB2, format="csr"),
        ],
        format="csr",
    )
    Px2 = sp.kron(tables.D1, tables.D2, format="csr")
    w = tables.w2d / det
    A = _symmetrize(_sandwich(Pdiv, w, Pdiv))
    B = _sandwich(Pdiv, w, Px2)
    return A, B


def assemble_theta(pair: DeRhamPair, coeff: Coefficient) -> sp.csr_matrix:
    """Projection-coefficient matrix: column i holds the X1 coefficients
    of the commuting projection of chat * (i-th X1 basis function).

    The coefficients are identical in the physical and the parametric
    expansion, so everything is computed parametrically.  Assembled once
    per (pair, coefficient); re-invocation returns the cached object.
    """
    if coeff in pair._theta_cache:
        return pair._theta_cache[coeff]
    n1, m2 = pair.shape_comp1
    m1, n2 = pair.shape_comp2
    Lp1 = pair.qi1.weights
    Lp2 = pair.qi2.weights
    Lc1 = pair.cp1.comm_weights
    Lc2 = pair.cp2.comm_weights
    B1_eta = pair.samples("B1_eta")
    B2_eta = pair.samples("B2_eta")
    D1_s = pair.samples("D1_s")
    D2_s = pair.samples("D2_s")
    eta1, s1 = pair.grid1.eta, pair.grid1.all_nodes
    eta2, s2 = pair.grid2.eta, pair.grid2.all_nodes

    chat_11 = np.asarray(coeff.chat(eta1[:, None], s2[None, :]), dtype=float)
    chat_22 = np.asarray(coeff.chat(s1[:, None], eta2[None, :]), dtype=float)

    def block(rows_w, rows_samp, sweep_op, samp_s, chat_rows, outer_dim, kron_left):
        rows, cols, vals = [], [], []
        for a in range(chat_rows.shape[0]):
            u = rows_w[:, a]
            w = rows_samp[a, :]
            iu = np.nonzero(u)[0]
            iw = np.nonzero(w)[0]
            if len(iu) == 0 or len(iw) == 0:
                continue
            T = (sweep_op * chat_rows[a][None, :]) @ samp_s
            rT, cT = np.nonzero(np.abs(T) > THETA_DROP_TOL)
            vT = T[rT, cT]
            # kron of the rank-one (u w^T) with T, laid out per component
            pair_w = np.multiply.outer(u[iu], w[iw]).ravel()
            if kron_left:
                r = (np.repeat(iu, len(iw))[:, None] * T.shape[0] + rT[None, :]).ravel()
                c = (np.tile(iw, len(iu))[:, None] * T.shape[1] + cT[None, :]).ravel()
            else:
                r = (rT[None, :] * outer_dim + np.repeat(iu, len(iw))[:, None]).ravel()
                c = (cT[None, :] * outer_dim + np.tile(iw, len(iu))[:, None]).ravel()
            rows.append(r)
            cols.append(c)
            vals.append((pair_w[:, None] * vT[None, :]).ravel())
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return rows, cols, vals

    # component 1: plain projector in direction 1, commuting in direction 2
    r1, c1, v1 = block(Lp1, B1_eta, Lc2, D2_s, chat_11, n1, kron_left=True)
    T11 = sp.coo_matrix((v1, (r1, c1)), shape=(n1 * m2, n1 * m2)).tocsr()
    # component 2: commuting in direction 1, plain in direction 2
    r2, c2, v2 = block(Lp2, B2_eta, Lc1, D1_s, chat_22.T, n2, kron_left=False)
    T22 = sp.coo_matrix((v2, (r2, c2)), shape=(m1 * n2, m1 * n2)).tocsr()
    theta = sp.block_diag([T11, T22], format="csr")
    theta.data[np.abs(theta.data) < THETA_DROP_TOL] = 0.0
    theta.eliminate_zeros()
    pair._theta_cache[coeff] = theta
    return theta


@dataclass
class SystemMatrices:
    """Time-independent matrices of the fully discrete schemes.

    A and B are never quadratured independently: the identities
    A = D^T M2 D and B = D^T M2 are validated on a small mesh by the
    test suite and then used as definitions, which makes the discrete
    energy identity exact up to solver tolerance.
    """

    pair: DeRhamPair
    geo: GeometryMap
    coeff: Coefficient
    M: sp.csr_matrix
    M2: sp.csr_matrix
    D: sp.csr_matrix
    Theta: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    Bc: sp.csr_matrix | None = None
    tables: QuadTables | None = None


def build_system(
    pair: DeRhamPair,
    geo: GeometryMap,
    coeff: Coefficient,
    q: tuple[int, int] | None = None,
    with_galerkin: bool = False,
) -> SystemMatrices:
    tables = QuadTables(pair, q)
    M = assemble_mass_x1(pair, geo, tables)
    M2 = assemble_mass_x2(pair, geo, tables)
    D = divergence_matrix(pair)
    B = (D.T @ M2).tocsr()
    A = _symmetrize((B @ D).tocsr())
    Theta = assemble_theta(pair, coeff)
    Bc = assemble_galerkin_coupling(pair, geo, coeff, tables) if with_galerkin else None
    return SystemMatrices(
        pair=pair, geo=geo, coeff=coeff, M=M, M2=M2, D=D, Theta=Theta, A=A, B=B,
        Bc=Bc, tables=tables,
    )


class H1Space:
    """Scalar tensor spline space with Dirichlet rows eliminated, used
    for the reference eigenproblem."""

    def __init__(self, p, elements, bc):
        p1, p2 = p
        e1, e2 = elements
        kind2 = PERIODIC if bc == "mixed" else OPEN
        self.S1 = make_uniform_space(p1, e1, OPEN)
        self.S2 = make_uniform_space(p2, e2, kind2)
        self.keep1 = np.arange(1, self.S1.dim - 1)
        self.keep2 = (
            np.arange(self.S2.dim) if kind2 == PERIODIC else np.arange(1, self.S2.dim - 1)
        )
        self.shape_full = (self.S1.dim, self.S2.dim)

    @property
    def dim(self) -> int:
        return len(self.keep1) * len(self.keep2)

    def flat_keep(self) -> np.ndarray:
        return (self.keep1[:, None] * self.shape_full[1] + self.keep2[None, :]).ravel()

    def embed(self, reduced: np.ndarray) -> np.ndarray:
        """Reduced coefficient vector -> full 2d coefficient array with
        homogeneous Dirichlet rows reinstated as zeros."""
        full = np.zeros(self.shape_full)
        full[np.ix_(self.keep1, self.keep2)] = np.asarray(reduced).reshape(
            len(self.keep1), len(self.keep2)
        )
        return full


def assemble_h1(
    p,
    elements,
    geo: GeometryMap,
    coeff: Coefficient,
    bc: str,
    q: int | None = None,
    eliminate: bool = True,
):
    """Stiffness (with coefficient c^2) and mass of the H1 space.

    Returns ``(K, M, space)``.  With ``eliminate=True`` the Dirichlet
    rows prescribed by ``bc`` are removed; with ``eliminate=False`` the
    full-space matrices are returned (pre-elimination the stiffness has
    Neumann structure, with constants in its kernel).
    """
    p1, p2 = p
    e1, e2 = elements
    space = H1Space(p, elements, bc)
    qq = (p1 + 2 if q is None else q, p2 + 2 if q is None else q)
    rule1 = QuadratureRule.build(e1, qq[0])
    rule2 = QuadratureRule.build(e2, qq[1])
    B1, dB1 = eval_basis_matrix(space.S1, rule1.points, derivative=True)
    B2, dB2 = eval_basis_matrix(space.S2, rule2.points, derivative=True)
    B1, dB1, B2, dB2 = map(_sparse_colloc, (B1, dB1, B2, dB2))
    x1 = rule1.points[:, None]
    x2 = rule2.points[None, :]
    j11, j12, j21, j22 = (np.ravel(a) for a in geo.jacobian(x1, x2))
    det = np.ravel(geo.det(x1, x2))
    chat2 = np.ravel(coeff.chat(x1, x2)) ** 2
    w = np.kron(rule1.weights, rule2.weights)
    # det * (DF^T DF)^{-1} via the 2x2 adjugate
    h11 = (j12 * j12 + j22 * j22) / det
    h22 = (j11 * j11 + j21 * j21) / det
    h12 = -(j11 * j12 + j21 * j22) / det
    G1 = sp.kron(dB1, B2, format="csr")
    G2 = sp.kron(B1, dB2, format="csr")
    Phi = sp.kron(B1, B2, format="csr")
    K = (
        _sandwich(G1, w * chat2 * h11, G1)
        + _sandwich(G2, w * chat2 * h22, G2)
        + _sandwich(G1, w * chat2 * h12, G2)
        + _sandwich(G2, w * chat2 * h12, G1)
    )
    Mh = _sandwich(Phi, w * det, Phi)
    K = _symmetrize(K.tocsr())
    Mh = _symmetrize(Mh)
    if not eliminate:
        return K, Mh, space
    keep = space.flat_keep()
    return K[np.ix_(keep, keep)].tocsr(), Mh[np.ix_(keep, keep)].tocsr(), space


def write_matrix_coo(path, mat: sp.spmatrix):
    """Coordinate-format text dump: one 'row col value' line per entry,
    17 significant digits, for cross-implementation diffing."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# shape {coo.shape[0]} {coo.shape[1]}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
