"""Quasi-interpolant spline projectors with explicit dual functionals.

Degrees 2 and 3 only: these are the degrees with closed-form dual
weights (three-point and five-point local polynomial interpolation over
breakpoints and midpoints of a uniform partition).  On top of the plain
projector, the commuting variant projects the antiderivative, computed
with composite Cavalieri-Simpson quadrature, and differentiates the
result, so that projection and differentiation commute.

Sample layout: every projector consumes point values of the target
function on a fixed evaluation grid -- the breakpoints interleaved with
midpoints (``eta``), plus, for the commuting variant, the further
midpoints between consecutive eta nodes needed by the Simpson rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .splines import (
    OPEN,
    PERIODIC,
    DerivedSpace1D,
    SplineSpace1D,
    derivative_matrix,
    derived_space,
    make_uniform_space,
)

SUPPORTED_DEGREES = (2, 3)

# interior dual weights on (breakpoint, midpoint, breakpoint[, ...]) stencils
_W2 = np.array([-0.5, 2.0, -0.5])
_W3 = np.array([1.0 / 6.0, -4.0 / 3.0, 10.0 / 3.0, -4.0 / 3.0, 1.0 / 6.0])
# boundary rows for degree 3 (first five eta nodes; mirrored at the right end)
_W3_EDGE = np.array([-5.0 / 18.0, 20.0 / 9.0, -4.0 / 3.0, 4.0 / 9.0, -1.0 / 18.0])


@dataclass(frozen=True)
class EvalGrid:
    """Evaluation grid of a uniform partition with ``num_elements`` cells.

    ``eta`` holds the 2E+1 breakpoints interleaved with midpoints,
    ``further`` the 2E midpoints of consecutive eta nodes (the extra
    Simpson sample per half-element).
    """

    num_elements: int
    eta: np.ndarray
    further: np.ndarray

    @property
    def n_eta(self) -> int:
        return 2 * self.num_elements + 1

    @property
    def n_samples(self) -> int:
        return self.n_eta + 2 * self.num_elements

    @property
    def all_nodes(self) -> np.ndarray:
        return np.concatenate([self.eta, self.further])

    @property
    def seg_length(self) -> float:
        return 0.5 / self.num_elements


@lru_cache(maxsize=None)
def eval_grid(num_elements: int) -> EvalGrid:
    eta = np.linspace(0.0, 1.0, 2 * num_elements + 1)
    further = 0.5 * (eta[:-1] + eta[1:])
    return EvalGrid(num_elements=num_elements, eta=eta, further=further)


def _sample(f, nodes: np.ndarray) -> np.ndarray:
    out = np.asarray(f(nodes), dtype=float)
    if out.shape != nodes.shape:
        raise ValueError("function must evaluate vectorized over a 1d node array")
    return out


@dataclass(frozen=True)
class QuasiInterpolant1D:
    """Projector onto a degree-2 or degree-3 spline space.

    Open spaces interpolate at the boundary (the first and last dual
    functionals are point evaluations at 0 and 1); periodic spaces apply
    the interior stencil to every coefficient with wraparound sampling.

    ``weight_perturbation`` is a self-test hook: it is added to one
    interior dual weight, which breaks delta-duality and must make the
    duality check fail.  It is never set in production paths.
    """

    space: SplineSpace1D
    weight_perturbation: float = 0.0

    def __post_init__(self):
        if self.space.degree not in SUPPORTED_DEGREES:
            raise ValueError(
                f"quasi-interpolant defined for degrees {SUPPORTED_DEGREES}, "
                f"got {self.space.degree}"
            )
        if self.space.num_elements < self.space.degree:
            raise ValueError("dual stencils need at least `degree` elements")

    @property
    def grid(self) -> EvalGrid:
        return eval_grid(self.space.num_elements)

    @property
    def weights(self) -> np.ndarray:
        """Dual-functional matrix of shape (dim, n_eta): coefficients are
        ``weights @ f(eta)``."""
        return _interp_weights(
            self.space.degree,
            self.space.num_elements,
            self.space.kind,
            self.weight_perturbation,
        )


@lru_cache(maxsize=None)
def _interp_weights(p: int, num_elements: int, kind: str, perturbation: float) -> np.ndarray:
    E = num_elements
    n_eta = 2 * E + 1
    stencil = (_W2 if p == 2 else _W3).copy()
    stencil[len(stencil) // 2] += perturbation
    width = len(stencil)
    if kind == OPEN:
        n = E + p
        W = np.zeros((n, n_eta))
        W[0, 0] = 1.0
        W[n - 1, n_eta - 1] = 1.0
        if p == 2:
            for i in range(1, n - 1):
                W[i, 2 * (i - 1): 2 * (i - 1) + width] = stencil
        else:
            W[1, 0:5] = _W3_EDGE
            W[n - 2, n_eta - 5: n_eta] = _W3_EDGE[::-1]
            for i in range(2, n - 2):
                W[i, 2 * (i - 2): 2 * (i - 2) + width] = stencil
        return W
    # periodic: interior stencil for every coefficient, eta indices wrapped
    # modulo the 2E distinct periodic nodes
    W = np.zeros((E, n_eta))
    offset = 2 * (1 - p)  # eta index of the leftmost stencil node for k = 0
    for k in range(E):
        for s, w in enumerate(stencil):
            m = (2 * k + offset + s) % (2 * E)
            W[k, m] += w
    return W


def dual_functional(qi: QuasiInterpolant1D, i: int, eta_samples: np.ndarray) -> float:
    """Apply the i-th dual functional to function values on the eta grid."""
    return float(qi.weights[i] @ np.asarray(eta_samples, dtype=float))


def project(qi: QuasiInterpolant1D, f) -> np.ndarray:
    """Coefficients of the quasi-interpolant of ``f`` (vectorized callable)."""
    return qi.weights @ _sample(f, qi.grid.eta)


def kahan_cumsum(terms: np.ndarray) -> np.ndarray:
    """Compensated cumulative sum; entry k holds the sum of terms[:k]."""
    out = np.empty(len(terms) + 1)
    out[0] = 0.0
    s = 0.0
    comp = 0.0
    for k, t in enumerate(terms):
        y = t - comp
        tmp = s + y
        comp = (tmp - s) - y
        s = tmp
        out[k + 1] = s
    return out


def simpson_segments(grid: EvalGrid, f_eta: np.ndarray, f_further: np.ndarray) -> np.ndarray:
    """Per-segment composite Simpson integrals between consecutive eta nodes."""
    d = grid.seg_length
    return (d / 6.0) * (f_eta[:-1] + 4.0 * f_further + f_eta[1:])


def simpson_antiderivative(grid: EvalGrid, f) -> np.ndarray:
    """Values of F(eta_i) = integral of f from 0 to eta_i.

    Composite Cavalieri-Simpson on each half-element segment; exact for
    polynomials up to degree 3.  Accumulation is compensated so that
    long grids do not lose the conservation structure to round-off.
    """
    f_eta = _sample(f, grid.eta)
    f_fur = _sample(f, grid.further)
    return kahan_cumsum(simpson_segments(grid, f_eta, f_fur))


@dataclass(frozen=True)
class CommutativeProjector1D:
    """Projector onto the rescaled degree-(p-1) space that commutes with
    differentiation: project the antiderivative with the degree-p
    quasi-interpolant, then take the exact coefficient difference."""

    qi: QuasiInterpolant1D

    @property
    def space(self) -> SplineSpace1D:
        return self.qi.space

    @property
    def target(self) -> DerivedSpace1D:
        return derived_space(self.qi.space)

    @property
    def periodic(self) -> bool:
        return self.qi.space.kind == PERIODIC

    @property
    def grid(self) -> EvalGrid:
        return self.qi.grid

    @property
    def comm_weights(self) -> np.ndarray:
        """Linear operator of shape (dim_target, n_eta + n_further) mapping
        samples of g on (eta, further midpoints) to the coefficients of the
        commuting projection of g."""
        return _comm_weights_cached(
            self.space.degree,
            self.space.num_elements,
            self.space.kind,
            self.qi.weight_perturbation,
        )


@lru_cache(maxsize=None)
def _comm_weights_cached(p, num_elements, kind, perturbation) -> np.ndarray:
    space = make_uniform_space(p, num_elements, kind)
    qi = QuasiInterpolant1D(space, weight_perturbation=perturbation)
    return _build_comm_weights(qi)


def _build_comm_weights(qi: QuasiInterpolant1D) -> np.ndarray:
    grid = qi.grid
    E = grid.num_elements
    n_eta = grid.n_eta
    n_all = grid.n_samples
    d = grid.seg_length
    # per-segment Simpson weights over the concatenated (eta, further) samples
    seg = np.zeros((2 * E, n_all))
    rows = np.arange(2 * E)
    seg[rows, rows] += d / 6.0
    seg[rows, rows + 1] += d / 6.0
    seg[rows, n_eta + rows] += 4.0 * d / 6.0
    # cumulative: F(eta_m) = sum of segments before m
    cum = np.tril(np.ones((n_eta, 2 * E)), k=-1) @ seg
    diff = derivative_matrix(qi.space).toarray()
    if qi.space.kind == OPEN:
        return diff @ qi.weights @ cum
    # periodic: split off the mean so the antiderivative is periodic, then
    # restore the constant, whose coefficients in the rescaled basis are
    # mean * h (the basis sums to 1/h)
    mean_w = seg.sum(axis=0)  # full-interval Simpson weights
    center = np.eye(n_all) - np.outer(np.ones(n_all), mean_w)
    h = 1.0 / E
    core = diff @ qi.weights @ cum @ center
    return core + h * np.outer(np.ones(qi.space.dim), mean_w)


def project_commutative(cp: CommutativeProjector1D, g) -> np.ndarray:
    """Coefficients (rescaled degree-(p-1) basis) of the commuting
    projection of ``g``; open boundary mode."""
    if cp.periodic:
        return project_commutative_periodic(cp, g)
    grid = cp.grid
    F = simpson_antiderivative(grid, g)
    a = cp.qi.weights @ F
    return derivative_matrix(cp.space) @ a


def project_commutative_periodic(cp: CommutativeProjector1D, g) -> np.ndarray:
    """Periodic variant: project the zero-average part through the
    antiderivative, then add back the mean (exactly representable)."""
    if not cp.periodic:
        raise ValueError("projector is not periodic")
    grid = cp.grid
    g_eta = _sample(g, grid.eta)
    g_fur = _sample(g, grid.further)
    segs = simpson_segments(grid, g_eta, g_fur)
    gbar = float(np.sum(segs))
    # antiderivative of the centered g; periodic since its mean vanishes
    segs_tilde = segs - gbar * grid.seg_length
    F = kahan_cumsum(segs_tilde)
    a = cp.qi.weights @ F
    coeffs = derivative_matrix(cp.space) @ a
    return coeffs + gbar / grid.num_elements
