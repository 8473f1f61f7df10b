"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line with the measured values (run with ``pytest -s`` to see all lines).

The two long-horizon criteria honor QIWAVE_PAPER=1: criterion 3 then
runs the full 30000-step schedule instead of the 3000-step fast variant,
and criterion 5 (paper-domain convergence) is executed instead of
skipped.
"""

import os
import time

import numpy as np
import pytest
import scipy.sparse as sp

from qiwave.assembly import (
    QuadTables,
    assemble_divdiv_direct,
    assemble_theta,
    build_system,
)
from qiwave.derham import (
    DIRICHLET,
    MIXED_PERIODIC,
    build_spaces,
    divergence_matrix,
    eval_x2,
    project_pi1,
    project_pi2,
)
from qiwave.geometry import (
    constant_coefficient,
    quarter_annulus,
    sine_bump_coefficient,
    unit_square,
)
from qiwave.linalg import generalized_eig_near
from qiwave.quasi_interp import QuasiInterpolant1D
from qiwave.reference import analytic_mode, discrete_eigen_reference
from qiwave.splines import OPEN, PERIODIC, eval_basis_matrix, make_uniform_space
from qiwave.timestepping import (
    CrankNicolsonGalerkin,
    CrankNicolsonQI,
    EnergyTracker,
    MomentErrorTracker,
    SolverState,
    error_norms,
    initial_state,
    run,
)

PAPER_MODE = os.environ.get("QIWAVE_PAPER", "") == "1"
RNG = np.random.default_rng(424242)


def report(criterion: int, ok: bool, detail: str, elapsed: float):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance {criterion}] {status}: {detail} ({elapsed:.1f}s)")


def test_criterion_1_qi_algebra():
    t0 = time.perf_counter()
    worst_dual = 0.0
    worst_repr = 0.0
    for p in (2, 3):
        for kind in (OPEN, PERIODIC):
            for e in (8, 16, 32):
                space = make_uniform_space(p, e, kind)
                qi = QuasiInterpolant1D(space)
                B = eval_basis_matrix(space, qi.grid.eta)
                worst_dual = max(
                    worst_dual, float(np.max(np.abs(qi.weights @ B - np.eye(space.dim))))
                )
                for _ in range(10):
                    coeffs = RNG.standard_normal(space.dim)
                    got = qi.weights @ (B @ coeffs)
                    worst_repr = max(worst_repr, float(np.max(np.abs(got - coeffs))))
    elapsed = time.perf_counter() - t0
    ok = worst_dual <= 1e-11 and worst_repr <= 1e-11 and elapsed < 5.0
    report(1, ok, f"duality {worst_dual:.2e}, reproduction {worst_repr:.2e}", elapsed)
    assert worst_dual <= 1e-11
    assert worst_repr <= 1e-11
    assert elapsed < 5.0


def test_criterion_2_commuting_diagram():
    t0 = time.perf_counter()
    # exactness for spline inputs (both boundary settings)
    worst_exact = 0.0
    for bc in (DIRICHLET, MIXED_PERIODIC):
        pair = build_spaces((3, 3), (8, 8), bc)
        D = divergence_matrix(pair)
        from qiwave.derham import eval_x1

        coeffs = RNG.standard_normal(pair.dim_x1)
        div_coeffs = D @ coeffs

        def lift(eval_fn):
            def f(X1, X2):
                g1 = np.unique(np.ravel(X1))
                g2 = np.unique(np.ravel(X2))
                V = eval_fn(g1, g2)
                i1 = np.searchsorted(g1, np.broadcast_arrays(X1, X2)[0])
                i2 = np.searchsorted(g2, np.broadcast_arrays(X1, X2)[1])
                return V[i1, i2]

            return f

        lhs = D @ project_pi1(
            pair,
            lift(lambda g1, g2: eval_x1(pair, coeffs, g1, g2)[0]),
            lift(lambda g1, g2: eval_x1(pair, coeffs, g1, g2)[1]),
        ).coeffs
        rhs = project_pi2(pair, lift(lambda g1, g2: eval_x2(pair, div_coeffs, g1, g2))).coeffs
        worst_exact = max(worst_exact, float(np.max(np.abs(lhs - rhs))))

    # decay order for smooth inputs over 3 refinements
    chat = lambda X1, X2: 2.0 + np.sin(np.pi * X1) * np.cos(np.pi * X2)
    f1 = lambda X1, X2: np.sin(np.pi * X1) * np.cos(np.pi * X2)
    f2 = lambda X1, X2: np.cos(np.pi * X1) * np.sin(np.pi * X2)
    g1_ = lambda X1, X2: chat(X1, X2) * f1(X1, X2)
    g2_ = lambda X1, X2: chat(X1, X2) * f2(X1, X2)
    step = 1e-6

    def div_cf(X1, X2):
        d1 = (g1_(X1 + step, X2) - g1_(X1 - step, X2)) / (2 * step)
        d2 = (g2_(X1, X2 + step) - g2_(X1, X2 - step)) / (2 * step)
        return d1 + d2

    errs = []
    for e in (4, 8, 16):
        pair = build_spaces((3, 3), (e, e), DIRICHLET)
        Dm = divergence_matrix(pair)
        lhs = Dm @ project_pi1(pair, g1_, g2_).coeffs
        rhs = project_pi2(pair, div_cf).coeffs
        pts = np.linspace(0, 1, 140)
        diff = eval_x2(pair, lhs - rhs, pts, pts)
        errs.append(float(np.sqrt(np.mean(diff**2))))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    order = min(orders)
    elapsed = time.perf_counter() - t0
    ok = worst_exact <= 1e-9 and order >= 3.5 and elapsed < 10.0
    report(2, ok, f"spline residual {worst_exact:.2e}, smooth order {order:.2f}", elapsed)
    assert worst_exact <= 1e-9
    assert order >= 3.5
    assert elapsed < 10.0


def test_criterion_3_energy_conservation():
    t0 = time.perf_counter()
    n_steps = 30000 if PAPER_MODE else 3000
    k = 0.01
    geo = quarter_annulus()
    coeff = sine_bump_coefficient(geo)
    pair = build_spaces((3, 3), (32, 32), MIXED_PERIODIC)
    sys = build_system(pair, geo, coeff)
    wave = discrete_eigen_reference(
        geo, coeff, "mixed", p_ref=(4, 4), e_ref=(32, 32), target_omega=4 * np.pi
    )
    state = initial_state(sys, wave, k)
    tracker = EnergyTracker(sys, record_times=np.arange(0.0, n_steps * k + 1e-9, 1.0))
    run(CrankNicolsonQI(sys, k), state, n_steps, observers=[tracker])
    drift = tracker.max_drift
    elapsed = time.perf_counter() - t0
    budget = 300.0 if PAPER_MODE else 30.0
    ok = drift <= 1e-10 and elapsed < budget
    report(
        3,
        ok,
        f"{n_steps} steps ({'paper' if PAPER_MODE else 'fast'} variant), drift {drift:.2e}",
        elapsed,
    )
    assert drift <= 1e-10
    assert elapsed < budget


def _convergence_study(meshes, dt_equals_h: bool, methods=("qi", "galerkin"), T=1.0):
    geo = unit_square()
    coeff = constant_coefficient(geo, 1.0)
    wave = analytic_mode(1, 1)
    out = {m: [] for m in methods}
    for e in meshes:
        h = 1.0 / e
        k = h if dt_equals_h else 5e-4
        n_steps = int(round(T / k))
        pair = build_spaces((3, 3), (e, e), DIRICHLET)
        sys = build_system(pair, geo, coeff, with_galerkin="galerkin" in methods)
        for m in methods:
            stepper = (
                CrankNicolsonQI(sys, k) if m == "qi" else CrankNicolsonGalerkin(sys, k)
            )
            tracker = MomentErrorTracker(sys, wave)
            run(stepper, initial_state(sys, wave, k), n_steps, observers=[tracker])
            norms = error_norms(*tracker.as_arrays())
            out[m].append((h, norms["sup_e"]))
    return out


def test_criterion_4_spatial_convergence():
    # T = 0.25: at the pinned k = 5e-4 the accumulated CN time error must
    # stay below the h = 1/64 spatial error for the order to be visible
    t0 = time.perf_counter()
    res = _convergence_study((8, 16, 32, 64), dt_equals_h=False, T=0.25)
    orders = []
    for m in res:
        errs = res[m]
        for (h0, e0), (h1, e1) in zip(errs, errs[1:]):
            orders.append(np.log(e0 / e1) / np.log(h0 / h1))
    ratios = [eq / eg for (_, eq), (_, eg) in zip(res["qi"], res["galerkin"])]
    elapsed = time.perf_counter() - t0
    ok = min(orders) >= 2.7 and all(0.5 <= r <= 2.0 for r in ratios) and elapsed < 180.0
    report(
        4,
        ok,
        f"orders {[f'{o:.2f}' for o in orders]}, qi/galerkin ratios "
        f"{[f'{r:.2f}' for r in ratios]}",
        elapsed,
    )
    assert min(orders) >= 2.7
    assert all(0.5 <= r <= 2.0 for r in ratios)
    assert elapsed < 180.0


@pytest.mark.paper
@pytest.mark.skipif(not PAPER_MODE, reason="paper-domain study runs under QIWAVE_PAPER=1")
def test_criterion_5_paper_domain_convergence():
    t0 = time.perf_counter()
    geo = quarter_annulus()
    coeff = sine_bump_coefficient(geo)
    wave = discrete_eigen_reference(
        geo, coeff, "dirichlet", p_ref=(4, 4), e_ref=(64, 64), target_omega=4 * np.pi
    )
    omega_ok = abs(wave.omega - 4 * np.pi) / (4 * np.pi) <= 0.02
    errs = []
    for e in (8, 16, 32):
        h = 1.0 / e
        k = 5e-4
        pair = build_spaces((3, 3), (e, e), DIRICHLET)
        sys = build_system(pair, geo, coeff)
        tracker = MomentErrorTracker(sys, wave)
        run(CrankNicolsonQI(sys, k), initial_state(sys, wave, k), 2000, observers=[tracker])
        errs.append((h, error_norms(*tracker.as_arrays())["sup_e"]))
    orders = [
        np.log(e0 / e1) / np.log(h0 / h1) for (h0, e0), (h1, e1) in zip(errs, errs[1:])
    ]
    elapsed = time.perf_counter() - t0
    ok = omega_ok and min(orders) >= 2.5 and elapsed < 600.0
    report(
        5,
        ok,
        f"omega/4pi = {wave.omega / (4 * np.pi):.4f}, orders {[f'{o:.2f}' for o in orders]}",
        elapsed,
    )
    assert omega_ok
    assert min(orders) >= 2.5
    assert elapsed < 600.0


def test_criterion_6_global_cn_order():
    t0 = time.perf_counter()
    res = _convergence_study((8, 16, 32, 64), dt_equals_h=True)
    orders = []
    for m in res:
        errs = res[m]
        for (h0, e0), (h1, e1) in zip(errs, errs[1:]):
            orders.append(float(np.log(e0 / e1) / np.log(h0 / h1)))
    elapsed = time.perf_counter() - t0
    ok = all(1.8 <= o <= 2.3 for o in orders) and elapsed < 180.0
    report(6, ok, f"k=h orders {[f'{o:.2f}' for o in orders]}", elapsed)
    assert all(1.8 <= o <= 2.3 for o in orders)
    assert elapsed < 180.0


def test_criterion_7_structural_identities():
    t0 = time.perf_counter()
    # A = D^T M2 D and B = D^T M2 vs direct quadrature on p=(2,2), e=(3,3)
    pair = build_spaces((2, 2), (3, 3))
    geo = quarter_annulus()
    sys = build_system(pair, geo, constant_coefficient(geo, 1.0))
    A_direct, B_direct = assemble_divdiv_direct(pair, geo, QuadTables(pair))
    err_a = abs(sys.A - A_direct).max() / abs(A_direct).max()
    err_b = abs(sys.B - B_direct).max() / abs(B_direct).max()

    # Theta = identity for c = 1
    pair2 = build_spaces((3, 3), (6, 6), MIXED_PERIODIC)
    theta = assemble_theta(pair2, constant_coefficient(quarter_annulus(), 1.0))
    err_theta = abs(theta - sp.identity(pair2.dim_x1, format="csr")).max()

    # QI and Galerkin trajectories coincide when Theta = I
    geo_sq = unit_square()
    pair3 = build_spaces((2, 2), (6, 6), DIRICHLET)
    sys3 = build_system(pair3, geo_sq, constant_coefficient(geo_sq, 1.0), with_galerkin=True)
    k = 0.05
    s_qi = SolverState(
        v=RNG.standard_normal(pair3.dim_x1), phi=RNG.standard_normal(pair3.dim_x2), n=0, k=k
    )
    s_ga = SolverState(v=s_qi.v.copy(), phi=s_qi.phi.copy(), n=0, k=k)
    qi, ga = CrankNicolsonQI(sys3, k), CrankNicolsonGalerkin(sys3, k)
    for _ in range(20):
        s_qi = qi.step(s_qi)
        s_ga = ga.step(s_ga)
    scale = max(1.0, float(np.max(np.abs(s_qi.v))), float(np.max(np.abs(s_qi.phi))))
    err_traj = max(np.max(np.abs(s_qi.v - s_ga.v)), np.max(np.abs(s_qi.phi - s_ga.phi))) / scale
    elapsed = time.perf_counter() - t0
    ok = (
        err_a <= 1e-10
        and err_b <= 1e-10
        and err_theta <= 1e-10
        and err_traj <= 1e-10
        and elapsed < 10.0
    )
    report(
        7,
        ok,
        f"A {err_a:.2e}, B {err_b:.2e}, Theta-I {err_theta:.2e}, trajectories {err_traj:.2e}",
        elapsed,
    )
    assert err_a <= 1e-10 and err_b <= 1e-10
    assert err_theta <= 1e-10
    assert err_traj <= 1e-10
    assert elapsed < 10.0


def test_criterion_8_eigenreference_sanity():
    t0 = time.perf_counter()
    from qiwave.assembly import assemble_h1

    geo = unit_square()
    K, M, _ = assemble_h1((4, 4), (32, 32), geo, constant_coefficient(geo, 1.0), DIRICHLET)
    lams, _ = generalized_eig_near(K, M, sigma=0.0, count=4)
    err_sq = abs(lams[3] - 8 * np.pi**2) / (8 * np.pi**2)

    geo_a = quarter_annulus()
    Ka, Ma, _ = assemble_h1((4, 4), (32, 32), geo_a, sine_bump_coefficient(geo_a), DIRICHLET)
    lams_a, vecs_a = generalized_eig_near(Ka, Ma, sigma=0.0, count=4)
    x = vecs_a[:, 3]
    resid = float(
        np.linalg.norm(Ka @ x - lams_a[3] * (Ma @ x)) / np.sqrt(x @ (Ma @ x))
    )
    elapsed = time.perf_counter() - t0
    ok = err_sq <= 1e-3 and resid <= 1e-8 and elapsed < 60.0
    report(8, ok, f"square lambda4 rel err {err_sq:.2e}, annulus residual {resid:.2e}", elapsed)
    assert err_sq <= 1e-3
    assert resid <= 1e-8
    assert elapsed < 60.0
