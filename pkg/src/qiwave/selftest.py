"""Invariant self-test suite.

Runs every module's key invariants with explicit measured values and
tolerances and reports one line per check.  A negative-control mode
perturbs one quasi-interpolant dual weight through the test hook and
requires the duality check to fail, guarding against a vacuous suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    QuadratureRule,
    QuadTables,
    assemble_divdiv_direct,
    assemble_theta,
    build_system,
)
from .derham import (
    DIRICHLET,
    MIXED_PERIODIC,
    build_spaces,
    divergence_matrix,
    eval_x2,
    project_pi1,
    project_pi2,
)
from .geometry import (
    constant_coefficient,
    pullback_vector,
    quarter_annulus,
    sine_bump_coefficient,
    unit_square,
)
from .linalg import generalized_eig_near
from .quasi_interp import QuasiInterpolant1D, eval_grid, simpson_antiderivative
from .splines import OPEN, PERIODIC, eval_basis_matrix, eval_spline, make_uniform_space
from .timestepping import CrankNicolsonGalerkin, CrankNicolsonQI, SolverState, energy


@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    larger_is_better: bool = False

    @property
    def passed(self) -> bool:
        if self.larger_is_better:
            return self.measured >= self.tolerance
        return self.measured <= self.tolerance

    def line(self) -> str:
        op = ">=" if self.larger_is_better else "<="
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: measured {self.measured:.3e} ({op} {self.tolerance:g})"


def _duality_error(perturb: float = 0.0) -> float:
    worst = 0.0
    for p in (2, 3):
        for kind in (OPEN, PERIODIC):
            for e in (8, 16, 32):
                qi = QuasiInterpolant1D(
                    make_uniform_space(p, e, kind), weight_perturbation=perturb
                )
                B = eval_basis_matrix(qi.space, qi.grid.eta)
                worst = max(worst, float(np.max(np.abs(qi.weights @ B - np.eye(qi.space.dim)))))
    return worst


def _spline_reproduction_error() -> float:
    rng = np.random.default_rng(11)
    worst = 0.0
    for p in (2, 3):
        for kind in (OPEN, PERIODIC):
            space = make_uniform_space(p, 16, kind)
            qi = QuasiInterpolant1D(space)
            B = eval_basis_matrix(space, qi.grid.eta)
            for _ in range(25):
                coeffs = rng.standard_normal(space.dim)
                got = qi.weights @ (B @ coeffs)
                worst = max(worst, float(np.max(np.abs(got - coeffs))))
    return worst


def _partition_of_unity_error() -> float:
    rng = np.random.default_rng(12)
    xs = rng.uniform(0, 1, 1000)
    worst = 0.0
    for p, kind in ((2, OPEN), (3, OPEN), (2, PERIODIC), (3, PERIODIC)):
        V = eval_basis_matrix(make_uniform_space(p, 8, kind), xs)
        worst = max(worst, float(np.max(np.abs(V.sum(axis=1) - 1.0))))
    return worst


def _simpson_cubic_error() -> float:
    grid = eval_grid(7)
    F = simpson_antiderivative(grid, lambda x: x**3)
    return float(np.max(np.abs(F - grid.eta**4 / 4)))


def _derivative_fd_error() -> float:
    from .splines import derivative_matrix, derived_space, eval_derived

    rng = np.random.default_rng(13)
    space = make_uniform_space(3, 8, OPEN)
    coeffs = rng.standard_normal(space.dim)
    dcoeffs = derivative_matrix(space) @ coeffs
    xs = rng.uniform(0.05, 0.95, 50)
    step = 1e-6
    fd = (eval_spline(space, coeffs, xs + step) - eval_spline(space, coeffs, xs - step)) / (
        2 * step
    )
    exact = eval_derived(derived_space(space), dcoeffs, xs)
    return float(np.max(np.abs(fd - exact)) / max(1.0, np.max(np.abs(exact))))


def _piola_commutation_error() -> float:
    geo = quarter_annulus()
    vhat = pullback_vector(geo, lambda X, Y: (np.sin(X) * np.cos(2 * Y), X * Y + Y * Y))
    div_v = lambda X, Y: np.cos(X) * np.cos(2 * Y) + X + 2 * Y
    g = np.linspace(0.05, 0.95, 8)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    step = 1e-5
    d1 = (vhat(X1 + step, X2)[0] - vhat(X1 - step, X2)[0]) / (2 * step)
    d2 = (vhat(X1, X2 + step)[1] - vhat(X1, X2 - step)[1]) / (2 * step)
    X, Y = geo.map(X1, X2)
    rhs = geo.det(X1, X2) * div_v(X, Y)
    return float(np.max(np.abs(d1 + d2 - rhs)) / max(1.0, np.max(np.abs(rhs))))


def _commuting_residuals(meshes=(4, 8, 16)):
    """Spline-exactness residual and smooth-input residuals per mesh."""
    rng = np.random.default_rng(14)
    pair = build_spaces((3, 3), (6, 6), MIXED_PERIODIC)
    D = divergence_matrix(pair)
    coeffs = rng.standard_normal(pair.dim_x1)
    from .derham import eval_x1

    def comp(which):
        def f(X1, X2):
            g1 = np.unique(np.ravel(X1))
            g2 = np.unique(np.ravel(X2))
            V = eval_x1(pair, coeffs, g1, g2)[which]
            i1 = np.searchsorted(g1, np.broadcast_arrays(X1, X2)[0])
            i2 = np.searchsorted(g2, np.broadcast_arrays(X1, X2)[1])
            return V[i1, i2]

        return f

    div_coeffs = D @ coeffs

    def div_field(X1, X2):
        g1 = np.unique(np.ravel(X1))
        g2 = np.unique(np.ravel(X2))
        V = eval_x2(pair, div_coeffs, g1, g2)
        i1 = np.searchsorted(g1, np.broadcast_arrays(X1, X2)[0])
        i2 = np.searchsorted(g2, np.broadcast_arrays(X1, X2)[1])
        return V[i1, i2]

    lhs = D @ project_pi1(pair, comp(0), comp(1)).coeffs
    rhs = project_pi2(pair, div_field).coeffs
    spline_resid = float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))

    f1 = lambda X1, X2: np.sin(np.pi * X1) * np.cos(np.pi * X2)
    f2 = lambda X1, X2: np.cos(np.pi * X1) * np.sin(np.pi * X2)
    dsum = lambda X1, X2: 2 * np.pi * np.cos(np.pi * X1) * np.cos(np.pi * X2)
    smooth = []
    for e in meshes:
        pr = build_spaces((3, 3), (e, e), DIRICHLET)
        Dm = divergence_matrix(pr)
        lhs = Dm @ project_pi1(pr, f1, f2).coeffs
        rhs = project_pi2(pr, dsum).coeffs
        pts = np.linspace(0, 1, 120)
        diff = eval_x2(pr, lhs - rhs, pts, pts)
        smooth.append(float(np.sqrt(np.mean(diff**2))))
    orders = [float(np.log2(smooth[i] / smooth[i + 1])) for i in range(len(smooth) - 1)]
    return spline_resid, smooth, min(orders)


def _theta_identity_error() -> float:
    pair = build_spaces((3, 3), (6, 6), MIXED_PERIODIC)
    theta = assemble_theta(pair, constant_coefficient(quarter_annulus(), 1.0))
    import scipy.sparse as sp

    return float(abs(theta - sp.identity(pair.dim_x1, format="csr")).max())


def _structural_identity_error() -> float:
    pair = build_spaces((2, 2), (3, 3))
    geo = quarter_annulus()
    tables = QuadTables(pair)
    sys = build_system(pair, geo, constant_coefficient(geo, 1.0))
    A_direct, B_direct = assemble_divdiv_direct(pair, geo, tables)
    ea = abs(sys.A - A_direct).max() / abs(A_direct).max()
    eb = abs(sys.B - B_direct).max() / abs(B_direct).max()
    return float(max(ea, eb))


def _mass_symmetry_error() -> float:
    pair = build_spaces((3, 2), (5, 4))
    sys = build_system(pair, quarter_annulus(), sine_bump_coefficient(quarter_annulus()))
    return float(
        max(
            abs(sys.M - sys.M.T).max() / abs(sys.M).max(),
            abs(sys.M2 - sys.M2.T).max() / abs(sys.M2).max(),
        )
    )


def _quadrature_error() -> float:
    worst = 0.0
    for q in (4, 5):
        rule = QuadratureRule.build(3, q)
        k = 2 * q - 1
        worst = max(worst, abs(float(rule.weights @ rule.points**k) - 1.0 / (k + 1)))
    return worst


def _energy_drift(steps: int = 100) -> float:
    rng = np.random.default_rng(15)
    pair = build_spaces((3, 3), (8, 8), MIXED_PERIODIC)
    geo = quarter_annulus()
    sys = build_system(pair, geo, sine_bump_coefficient(geo), with_galerkin=True)
    worst = 0.0
    for stepper in (CrankNicolsonQI(sys, 0.02), CrankNicolsonGalerkin(sys, 0.02)):
        state = SolverState(
            v=rng.standard_normal(pair.dim_x1), phi=rng.standard_normal(pair.dim_x2), n=0, k=0.02
        )
        e0 = energy(sys, state)
        e_prev = e0
        for _ in range(steps):
            state = stepper.step(state)
            e = energy(sys, state)
            worst = max(worst, abs(e - e_prev) / e0)
            e_prev = e
    return float(worst)


def _eigen_residual() -> float:
    geo = unit_square()
    from .assembly import assemble_h1

    K, M, _ = assemble_h1((3, 3), (12, 12), geo, constant_coefficient(geo, 1.0), DIRICHLET)
    lams, vecs = generalized_eig_near(K, M, sigma=0.0, count=4)
    worst = 0.0
    for j in range(4):
        x = vecs[:, j]
        res = np.linalg.norm(K @ x - lams[j] * (M @ x)) / np.sqrt(x @ (M @ x))
        worst = max(worst, float(res))
    return worst


def run_selftest(negative_control: bool = False, verbose_print=print) -> bool:
    """Run all invariant checks; returns True iff every check passed.

    With ``negative_control=True`` the duality check runs with a
    perturbed dual weight and the suite passes only if that check fails.
    """
    checks: list[CheckResult] = []
    if negative_control:
        perturbed = _duality_error(perturb=1e-3)
        ok = perturbed > 1e-11
        verbose_print(
            f"{'PASS' if ok else 'FAIL'}  negative-control duality with perturbed weight: "
            f"measured {perturbed:.3e} (must exceed 1e-11)"
        )
        return ok

    checks.append(CheckResult("qi duality (p in 2,3; open+periodic; e 8..32)", _duality_error(), 1e-11))
    checks.append(CheckResult("qi spline reproduction", _spline_reproduction_error(), 1e-11))
    checks.append(CheckResult("partition of unity", _partition_of_unity_error(), 1e-13))
    checks.append(CheckResult("simpson cubic exactness", _simpson_cubic_error(), 1e-15))
    checks.append(CheckResult("derivative matrix vs finite differences", _derivative_fd_error(), 1e-5))
    checks.append(CheckResult("piola divergence commutation", _piola_commutation_error(), 1e-8))
    spline_resid, smooth, order = _commuting_residuals()
    checks.append(CheckResult("commuting diagram on splines", spline_resid, 1e-10))
    for e, r in zip((4, 8, 16), smooth):
        verbose_print(f"      commuting-diagram smooth residual at e={e}: {r:.3e}")
    checks.append(CheckResult("commuting diagram smooth order", order, 3.5, larger_is_better=True))
    checks.append(CheckResult("theta identity for c=1", _theta_identity_error(), 1e-12))
    checks.append(CheckResult("A,B structural identities vs quadrature", _structural_identity_error(), 1e-10))
    checks.append(CheckResult("mass symmetry", _mass_symmetry_error(), 1e-13))
    checks.append(CheckResult("gauss quadrature exactness", _quadrature_error(), 1e-14))
    checks.append(CheckResult("per-step energy conservation (both schemes)", _energy_drift(), 1e-11))
    checks.append(CheckResult("eigen residual", _eigen_residual(), 1e-8))

    all_ok = True
    for c in checks:
        verbose_print(c.line())
        all_ok = all_ok and c.passed
    return all_ok
