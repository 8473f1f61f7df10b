"""Tensor-product compatible spline pair X1 (div-conforming vector
fields) and X2 (scalars), with the parametric divergence matrix and the
multivariate commuting quasi-interpolant projectors.

The vector space X1 is spanned by B(p1) x D(p2-1) in the first component
and D(p1-1) x B(p2) in the second; X2 by D(p1-1) x D(p2-1), where B are
plain B-splines and D the rescaled derivative basis.  Coefficients are
stored lexicographically (component 1 block, then component 2; row-major
within each block).

Projections run as three-step tensor sweeps: sample the field on the
per-direction evaluation grids (breakpoints+midpoints in the plain
direction, plus further midpoints in the commuting direction), project
the inner direction for every outer node, then project the outer
direction per inner coefficient index.  Both sweeps are realized as one
dense sandwich product with the per-direction operator matrices, so the
result is independent of sweep order by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quasi_interp import CommutativeProjector1D, QuasiInterpolant1D, eval_grid
from .splines import (
    OPEN,
    PERIODIC,
    DerivedSpace1D,
    SplineSpace1D,
    derivative_matrix,
    derived_space,
    eval_basis_matrix,
    make_uniform_space,
)

DIRICHLET = "dirichlet"
MIXED_PERIODIC = "mixed"


def grid_eval(f, nodes1: np.ndarray, nodes2: np.ndarray) -> np.ndarray:
    """Evaluate a broadcast-vectorized scalar callable on a tensor grid."""
    out = np.asarray(f(nodes1[:, None], nodes2[None, :]), dtype=float)
    expected = (len(nodes1), len(nodes2))
    if out.shape != expected:
        raise ValueError(f"field returned shape {out.shape}, expected {expected}")
    return out


def derived_basis_matrix(ds: DerivedSpace1D, points: np.ndarray) -> np.ndarray:
    """Collocation matrix of the rescaled derivative basis."""
    return eval_basis_matrix(ds.base, points) * ds.scale[None, :]


class DeRhamPair:
    """Discrete de Rham pair on a tensor mesh of the parametric square.

    Parameters
    ----------
    p : tuple(int, int)
        Degrees (p1, p2), each 2 or 3.
    elements : tuple(int, int)
        Elements per direction; at least the degree.
    bc : str
        ``"dirichlet"`` (open in both directions) or ``"mixed"``
        (periodic identification in the second direction).
    """

    def __init__(self, p, elements, bc=DIRICHLET):
        p1, p2 = p
        e1, e2 = elements
        if bc not in (DIRICHLET, MIXED_PERIODIC):
            raise ValueError(f"unknown bc {bc!r}")
        for pl, el in ((p1, e1), (p2, e2)):
            if el < pl:
                raise ValueError(f"need elements >= degree, got {el} < {pl}")
        self.p = (p1, p2)
        self.elements = (e1, e2)
        self.bc = bc
        kind2 = PERIODIC if bc == MIXED_PERIODIC else OPEN
        self.S1 = make_uniform_space(p1, e1, OPEN)
        self.S2 = make_uniform_space(p2, e2, kind2)
        self.D1 = derived_space(self.S1)
        self.D2 = derived_space(self.S2)
        self.qi1 = QuasiInterpolant1D(self.S1)
        self.qi2 = QuasiInterpolant1D(self.S2)
        self.cp1 = CommutativeProjector1D(self.qi1)
        self.cp2 = CommutativeProjector1D(self.qi2)
        self.grid1 = eval_grid(e1)
        self.grid2 = eval_grid(e2)
        self._sample_cache = {}
        self._theta_cache = {}

    # dimensions -----------------------------------------------------------
    @property
    def shape_comp1(self):
        return (self.S1.dim, self.D2.dim)

    @property
    def shape_comp2(self):
        return (self.D1.dim, self.S2.dim)

    @property
    def shape_x2(self):
        return (self.D1.dim, self.D2.dim)

    @property
    def n_comp1(self) -> int:
        r, c = self.shape_comp1
        return r * c

    @property
    def n_comp2(self) -> int:
        r, c = self.shape_comp2
        return r * c

    @property
    def dim_x1(self) -> int:
        return self.n_comp1 + self.n_comp2

    @property
    def dim_x2(self) -> int:
        r, c = self.shape_x2
        return r * c

    def split_x1(self, coeffs: np.ndarray):
        """Split a flat X1 coefficient vector into the two 2d blocks."""
        coeffs = np.asarray(coeffs)
        c1 = coeffs[: self.n_comp1].reshape(self.shape_comp1)
        c2 = coeffs[self.n_comp1:].reshape(self.shape_comp2)
        return c1, c2

    def join_x1(self, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(c1), np.ravel(c2)])

    # sample tables (built once, shared by the theta columns) ---------------
    def samples(self, key: str) -> np.ndarray:
        """Cached per-direction basis collocation tables.

        Keys: ``B1_eta``, ``B1_s``, ``B2_eta``, ``B2_s``, ``D1_eta``,
        ``D1_s``, ``D2_eta``, ``D2_s`` where ``eta`` refers to the
        breakpoint/midpoint nodes and ``s`` to the full Simpson grid.
        """
        if key not in self._sample_cache:
            which, nodes_key = key.split("_")
            grid = self.grid1 if which.endswith("1") else self.grid2
            nodes = grid.eta if nodes_key == "eta" else grid.all_nodes
            if which.startswith("B"):
                space = self.S1 if which.endswith("1") else self.S2
                self._sample_cache[key] = eval_basis_matrix(space, nodes)
            else:
                ds = self.D1 if which.endswith("1") else self.D2
                self._sample_cache[key] = derived_basis_matrix(ds, nodes)
        return self._sample_cache[key]


def build_spaces(p, elements, bc=DIRICHLET) -> DeRhamPair:
    """Construct the discrete pair; see :class:`DeRhamPair`."""
    return DeRhamPair(p, elements, bc)


@dataclass
class DiscreteField:
    """Coefficient vector tagged with its space."""

    space: str  # "x1" | "x2" | "h1"
    coeffs: np.ndarray
    pair: DeRhamPair | None = None

    def __post_init__(self):
        if self.pair is not None:
            expected = {"x1": self.pair.dim_x1, "x2": self.pair.dim_x2}.get(self.space)
            if expected is not None and len(self.coeffs) != expected:
                raise ValueError(
                    f"{self.space} field needs {expected} coefficients, got {len(self.coeffs)}"
                )


def divergence_matrix(pair: DeRhamPair) -> sp.csr_matrix:
    """Parametric divergence: X1 coefficients -> X2 coefficients, exact."""
    diff1 = derivative_matrix(pair.S1)
    diff2 = derivative_matrix(pair.S2)
    m1, m2 = pair.shape_x2
    block1 = sp.kron(diff1, sp.identity(m2, format="csr"), format="csr")
    block2 = sp.kron(sp.identity(m1, format="csr"), diff2, format="csr")
    return sp.hstack([block1, block2], format="csr")


def project_pi1(pair: DeRhamPair, f1, f2) -> DiscreteField:
    """Commuting projection of a parametric vector field onto X1.

    ``f1`` and ``f2`` are the broadcast-vectorized component callables.
    Component 1 uses the plain projector in direction 1 and the
    commuting projector in direction 2 (and conversely for component 2),
    so the evaluation grids differ per component.
    """
    F1 = grid_eval(f1, pair.grid1.eta, pair.grid2.all_nodes)
    F2 = grid_eval(f2, pair.grid1.all_nodes, pair.grid2.eta)
    C1 = pair.qi1.weights @ F1 @ pair.cp2.comm_weights.T
    C2 = pair.cp1.comm_weights @ F2 @ pair.qi2.weights.T
    return DiscreteField("x1", pair.join_x1(C1, C2), pair)


def project_pi2(pair: DeRhamPair, g) -> DiscreteField:
    """Commuting projection of a parametric scalar field onto X2."""
    G = grid_eval(g, pair.grid1.all_nodes, pair.grid2.all_nodes)
    C = pair.cp1.comm_weights @ G @ pair.cp2.comm_weights.T
    return DiscreteField("x2", np.ravel(C), pair)


def eval_x1(pair: DeRhamPair, coeffs: np.ndarray, pts1: np.ndarray, pts2: np.ndarray):
    """Evaluate an X1 field on a tensor grid; returns both components."""
    c1, c2 = pair.split_x1(coeffs)
    B1 = eval_basis_matrix(pair.S1, pts1)
    B2 = eval_basis_matrix(pair.S2, pts2)
    D1 = derived_basis_matrix(pair.D1, pts1)
    D2 = derived_basis_matrix(pair.D2, pts2)
    return B1 @ c1 @ D2.T, D1 @ c2 @ B2.T


def eval_x2(pair: DeRhamPair, coeffs: np.ndarray, pts1: np.ndarray, pts2: np.ndarray):
    """Evaluate an X2 field on a tensor grid."""
    C = np.asarray(coeffs).reshape(pair.shape_x2)
    D1 = derived_basis_matrix(pair.D1, pts1)
    D2 = derived_basis_matrix(pair.D2, pts2)
    return D1 @ C @ D2.T
