"""Univariate B-spline spaces on uniform partitions of [0, 1].

Open (clamped) and closed-periodic knot vectors, Cox-de Boor evaluation,
the rescaled degree-(p-1) basis used to express spline derivatives as a
pure two-term coefficient difference, and the corresponding banded
derivative matrix.

All indices are 0-based.  Only uniform breakpoint grids are supported:
the quasi-interpolant formulas in :mod:`qiwave.quasi_interp` assume
midpoints of a uniform partition, so non-uniform constructors are
rejected at the API boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

OPEN = "open"
PERIODIC = "periodic"


@dataclass(frozen=True)
class SplineSpace1D:
    """Univariate spline space of degree ``p`` on a uniform partition.

    Attributes
    ----------
    degree : int
        Polynomial degree ``p >= 1``.
    knots : np.ndarray
        Full knot vector, nondecreasing.  Open spaces are clamped with
        boundary multiplicity ``p + 1`` and knots inside [0, 1].
        Periodic spaces use a uniformly spaced closed knot vector whose
        outer knots extend beyond [0, 1] by ``p`` spacings; the basis is
        identified modulo the number of elements.
    num_elements : int
        Number of breakpoint intervals of [0, 1].
    kind : str
        ``"open"`` or ``"periodic"``.
    """

    degree: int
    knots: np.ndarray
    num_elements: int
    kind: str
    # derived, filled in __post_init__
    dim: int = field(init=False)
    nbasis: int = field(init=False)

    def __post_init__(self):
        p, e = self.degree, self.num_elements
        nbasis = len(self.knots) - p - 1
        object.__setattr__(self, "nbasis", nbasis)
        # periodic identification glues the first p basis functions onto
        # the last p, so the space has nbasis - p independent coefficients
        object.__setattr__(self, "dim", nbasis - p if self.kind == PERIODIC else nbasis)
        if self.kind == OPEN:
            assert nbasis == e + p
        else:
            assert self.dim == e

    @property
    def h(self) -> float:
        return 1.0 / self.num_elements

    @property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.num_elements + 1)

    def wrap_index(self, i):
        """Map an unclamped basis index to its periodic coefficient index."""
        if self.kind == PERIODIC:
            return np.asarray(i) % self.dim
        return np.asarray(i)


def make_uniform_space(p: int, num_elements: int, kind: str = OPEN) -> SplineSpace1D:
    """Build a degree-``p`` spline space on a uniform partition of [0, 1].

    Open spaces get an open knot vector with boundary multiplicity
    ``p + 1`` and simple interior knots.  Periodic spaces get a uniformly
    spaced closed knot vector; this requires at least ``p`` interior
    knots, i.e. ``num_elements >= p``.
    """
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if num_elements < 1:
        raise ValueError(f"need at least one element, got {num_elements}")
    h = 1.0 / num_elements
    if kind == OPEN:
        interior = np.arange(1, num_elements) * h
        knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    elif kind == PERIODIC:
        if num_elements < p:
            raise ValueError(
                f"periodic space of degree {p} needs >= {p} elements, got {num_elements}"
            )
        # closed vector: uniformly spaced simple knots, p of them on each
        # side of [0, 1]; nbasis = num_elements + p unclamped functions
        knots = (np.arange(num_elements + 2 * p + 1) - p) * h
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return SplineSpace1D(degree=p, knots=knots, num_elements=num_elements, kind=kind)


def _find_span(knots: np.ndarray, p: int, nbasis: int, x: float) -> int:
    """Index mu with knots[mu] <= x < knots[mu+1], clamped to valid spans.

    x == right end of the last nonempty span uses the left-limit
    convention, so the last basis function evaluates to 1 there.
    """
    lo, hi = p, nbasis
    if x >= knots[hi]:
        mu = hi - 1
        while knots[mu] == knots[mu + 1]:
            mu -= 1
        return mu
    return int(np.searchsorted(knots, x, side="right")) - 1


def _basis_funs(knots: np.ndarray, p: int, mu: int, x: float) -> np.ndarray:
    """Nonzero B-spline values B_{mu-p..mu} at x (Cox-de Boor recursion)."""
    vals = np.zeros(p + 1)
    left = np.zeros(p)
    right = np.zeros(p)
    vals[0] = 1.0
    for j in range(1, p + 1):
        left[j - 1] = x - knots[mu + 1 - j]
        right[j - 1] = knots[mu + j] - x
        saved = 0.0
        for r in range(j):
            tmp = vals[r] / (right[r] + left[j - 1 - r])
            vals[r] = saved + right[r] * tmp
            saved = left[j - 1 - r] * tmp
        vals[j] = saved
    return vals


def _basis_funs_and_ders(knots, p, mu, x):
    """Nonzero basis values and first derivatives at x."""
    vals = _basis_funs(knots, p, mu, x)
    ders = np.zeros(p + 1)
    if p >= 1:
        lower = _basis_funs(knots, p - 1, mu, x)  # degree p-1, indices mu-p+1..mu
        for j in range(p + 1):
            i = mu - p + j
            d = 0.0
            # d/dx B_{i,p} = p * (B_{i,p-1}/span_i - B_{i+1,p-1}/span_{i+1})
            if j >= 1:
                span = knots[i + p] - knots[i]
                if span > 0.0:
                    d += p * lower[j - 1] / span
            if j <= p - 1:
                span = knots[i + p + 1] - knots[i + 1]
                if span > 0.0:
                    d -= p * lower[j] / span
            ders[j] = d
    return vals, ders


def _wrap_point(space: SplineSpace1D, x: float) -> float:
    if space.kind == PERIODIC:
        x = x % 1.0
    return x


def eval_basis(space: SplineSpace1D, x: float):
    """Nonzero basis values at x in [0, 1].

    Returns ``(indices, values)`` with at most ``p + 1`` entries.  For
    periodic spaces the indices refer to the identified basis and may
    repeat when ``num_elements == p``; repeated indices carry summed
    contributions of the glued functions.
    """
    if not (0.0 <= x <= 1.0) and space.kind == OPEN:
        raise ValueError(f"x={x} outside [0, 1]")
    x = _wrap_point(space, x)
    mu = _find_span(space.knots, space.degree, space.nbasis, x)
    vals = _basis_funs(space.knots, space.degree, mu, x)
    idx = np.arange(mu - space.degree, mu + 1)
    return space.wrap_index(idx), vals


def eval_basis_matrix(space: SplineSpace1D, points: np.ndarray, derivative: bool = False):
    """Dense collocation matrix of shape (len(points), dim).

    With ``derivative=True`` also returns the matrix of first
    derivatives.  Periodic contributions are accumulated onto the
    identified coefficient index.
    """
    points = np.asarray(points, dtype=float)
    V = np.zeros((len(points), space.dim))
    Dm = np.zeros((len(points), space.dim)) if derivative else None
    p = space.degree
    for k, x in enumerate(points):
        xw = _wrap_point(space, x)
        mu = _find_span(space.knots, p, space.nbasis, xw)
        if derivative:
            vals, ders = _basis_funs_and_ders(space.knots, p, mu, xw)
        else:
            vals = _basis_funs(space.knots, p, mu, xw)
        idx = space.wrap_index(np.arange(mu - p, mu + 1))
        np.add.at(V[k], idx, vals)
        if derivative:
            np.add.at(Dm[k], idx, ders)
    if derivative:
        return V, Dm
    return V


@dataclass(frozen=True)
class DerivedSpace1D:
    """Degree-(p-1) spline space scaled so that differentiating a
    degree-p spline is the two-term coefficient difference.

    The basis functions are ``D_j = scale[j] * B_j`` with ``B_j`` the
    plain degree-(p-1) B-splines on the reduced knot vector and
    ``scale[j] = p / (t[j+p+1] - t[j+1])`` in terms of the parent knots
    ``t``; on uniform interiors this is 1/h.
    """

    base: SplineSpace1D
    scale: np.ndarray

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def degree(self) -> int:
        return self.base.degree


def derived_space(space: SplineSpace1D) -> DerivedSpace1D:
    """The rescaled degree-(p-1) space holding derivatives of ``space``.

    The reduced knot vector (parent knots minus the first and last one)
    coincides with the uniform degree-(p-1) vector of the same kind, so
    the base space is built directly; only the per-function scaling
    remembers the parent.
    """
    p = space.degree
    if p < 2:
        raise ValueError("derived spaces are only used for degree >= 2")
    base = make_uniform_space(p - 1, space.num_elements, space.kind)
    t = space.knots
    if space.kind == OPEN:
        j = np.arange(space.nbasis - 1)
        scale = p / (t[j + p + 1] - t[j + 1])
    else:
        scale = np.full(base.dim, float(space.num_elements))  # 1/h, uniform spans
    return DerivedSpace1D(base=base, scale=scale)


def curry_schoenberg_value(space: SplineSpace1D, j: int, x: float) -> float:
    """Value of the rescaled derivative basis function D_j at x.

    Open spaces: valid for ``0 <= j <= nbasis - 2``; the sentinel
    indices just outside that range return 0.  Periodic spaces take the
    identified (wrapped) coefficient index.
    """
    ds = derived_space(space)
    if space.kind == PERIODIC:
        j = int(j) % ds.dim
    else:
        span = space.knots[j + space.degree + 1] - space.knots[j + 1] \
            if 0 <= j <= space.nbasis - 2 else 0.0
        if j < 0 or j > space.nbasis - 2:
            return 0.0
        assert span > 0.0, "zero span: interior multiplicity must be <= p"
    V = eval_basis_matrix(ds.base, np.array([float(x)]))
    return float(ds.scale[j] * V[0, j])


def derivative_matrix(space: SplineSpace1D) -> sp.csr_matrix:
    """Banded matrix mapping degree-p coefficients to the coefficients of
    the derivative in the rescaled degree-(p-1) basis.

    Open spaces: shape (n-1, n), rows (-1, +1).  Periodic spaces: square
    with wraparound in the last row.
    """
    n = space.dim
    if space.kind == OPEN:
        rows = np.repeat(np.arange(n - 1), 2)
        cols = np.empty(2 * (n - 1), dtype=int)
        cols[0::2] = np.arange(n - 1)
        cols[1::2] = np.arange(1, n)
        vals = np.tile([-1.0, 1.0], n - 1)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))
    rows = np.repeat(np.arange(n), 2)
    cols = np.empty(2 * n, dtype=int)
    cols[0::2] = np.arange(n)
    cols[1::2] = (np.arange(n) + 1) % n
    vals = np.tile([-1.0, 1.0], n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def eval_spline(space: SplineSpace1D, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a spline with given coefficients at an array of points."""
    return eval_basis_matrix(space, points) @ np.asarray(coeffs)


def eval_derived(ds: DerivedSpace1D, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a spline given in the rescaled derivative basis."""
    V = eval_basis_matrix(ds.base, points)
    return V @ (ds.scale * np.asarray(coeffs))
