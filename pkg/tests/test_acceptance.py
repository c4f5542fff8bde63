"""Acceptance criteria 1 to 9, each with pinned tolerances and runtime limits.

Every test records a single PASS/FAIL line through the ``verdict`` fixture;
the lines are repeated in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest
import scipy.linalg as sla

from roughspec.analysis import annulus_closed_form, annulus_quadrature, convergence_study, fool_demo, poincare_check
from roughspec.eigensolve import gamma_mat, jacobi_pencil, jacobi_start, lu_preconditioner, oishi_bound, rayleigh_descent
from roughspec.enclosure import compute_qm, enclose
from roughspec.fem import assemble, triangulate
from roughspec.geometry import (
    estimate_Q,
    mosco_diagnostic,
    oracle_disc,
    oracle_julia,
    oracle_koch,
    oracle_square,
    pixelate,
)


def _bessel_j0(x: float) -> float:
    """Power series of J_0, summed until the terms are negligible."""
    total, term, k = 1.0, 1.0, 0
    while abs(term) > 1e-18 * max(1.0, abs(total)):
        k += 1
        term *= -(x * x / 4) / (k * k)
        total += term
    return total


def _first_j0_zero() -> float:
    lo, hi = 2.0, 3.0  # J_0(2) > 0 > J_0(3)
    assert _bessel_j0(lo) > 0 > _bessel_j0(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _bessel_j0(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_criterion_1_exact_square_bracketing(verdict):
    t0 = time.perf_counter()
    side = 0.75
    exact = [math.pi**2 * (i * i + j * j) / side**2 for i, j in ((1, 1), (1, 2), (2, 1))]
    mesh = triangulate(pixelate(oracle_square(0, 1), 4), 4)
    pen = assemble(mesh)
    res = gamma_mat(pen.A, pen.B, 1e-6, count=3)
    q = compute_qm(mesh, C0=0.493)
    rows, ok = [], res.certified
    for k in range(3):
        upper = res.values[k] + res.residual_bounds[k]
        lower, _ = enclose(res.values[k] - res.residual_bounds[k], q)
        good = exact[k] <= upper <= 1.01 * exact[k] and lower <= exact[k]
        ok &= good
        rows.append(f"k={k + 1}: [{lower:.4f}, {upper:.4f}] vs {exact[k]:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    verdict(1, "exact-square bracketing", ok, "; ".join(rows) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_2_disc_ground_state(verdict):
    t0 = time.perf_counter()
    target = _first_j0_zero() ** 2
    assert target == pytest.approx(5.7832, abs=1e-4)
    pen = assemble(triangulate(pixelate(oracle_disc(1.0), 32), 2))
    res = rayleigh_descent(pen.A, pen.B, 1, grad_tol=1e-8, preconditioner=lu_preconditioner(pen.A))
    lam = float(res.values[0])
    elapsed = time.perf_counter() - t0
    ok = target <= lam <= 1.03 * target and elapsed < 120
    verdict(2, "disc ground state", ok, f"lambda_1 <= {lam:.5f}, j01^2 = {target:.5f}, "
            f"{100 * (lam / target - 1):.2f}% above; {elapsed:.1f}s")
    assert ok


def test_criterion_3_convergence_data(verdict):
    t0 = time.perf_counter()
    c = -(math.sqrt(5) - 1) / 2
    tab = convergence_study(oracle_julia(complex(c, 0.0)), [20], 3, grad_tol=1e-10, precondition=True)
    diffs = tab.differences(20)
    reference = [0.1723, 0.0659, 0.0254]
    rate = tab.fitted_rate[20]
    elapsed = time.perf_counter() - t0
    ok = (
        len(diffs) == 3
        and all(abs(d - r) <= 0.2 * r for d, r in zip(diffs, reference))
        and 1.2 <= rate <= 1.5
        and elapsed < 600
    )
    verdict(3, "convergence data", ok, "diffs " + ", ".join(f"{d:.4f}" for d in diffs)
            + f"; rate {rate:.3f}; {elapsed:.1f}s")
    assert ok


def test_criterion_4_oishi_soundness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for trial in range(200):
        dim = int(rng.integers(1, 9))
        G = rng.standard_normal((dim, dim))
        H = rng.standard_normal((dim, dim))
        A = G @ G.T + 1e-2 * np.eye(dim)
        B = H @ H.T + 1e-1 * np.eye(dim)
        # approximate pairs after a single sweep, certified by the bound
        state = jacobi_start(A, B)
        state.sweep()
        approx, X = state.current()
        bound = oishi_bound(state.C, approx, X)
        # reference: Jacobi run to 1e-15, cross-checked against LAPACK
        ref, _, _ = jacobi_pencil(A, B, sweep_budget=100, tol=1e-15)
        assert ref == pytest.approx(sla.eigh(A, B, eigvals_only=True), rel=1e-9, abs=1e-12)
        failures += int(np.any(np.abs(ref - approx) > bound))
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 10
    verdict(4, "Oishi soundness", ok, f"{200 - failures}/200 pencils bounded; {elapsed:.1f}s")
    assert ok


def test_criterion_5_gamma_mat_accuracy(verdict):
    res = gamma_mat(np.array([[2.0, 1.0], [1.0, 2.0]]), np.eye(2), 1e-10)
    err = np.abs(res.values - [1.0, 3.0])
    ok = bool(np.all(err <= 1e-10) and np.all(res.residual_bounds <= 1e-10))
    verdict(5, "gamma_mat accuracy", ok, f"values {res.values.tolist()}, max error {err.max():.1e}")
    assert ok


def test_criterion_6_poincare(verdict):
    t0 = time.perf_counter()
    pd = pixelate(oracle_koch(4), 32)
    r = 0.02
    Q = estimate_Q(pd)
    assert 4 * math.sqrt(2) * r < Q  # hypothesis checked before sampling
    rep = poincare_check(pd, r, m=1, trials=100, seed=0)
    elapsed = time.perf_counter() - t0
    ok = rep.hypothesis_ok and rep.evaluated > 0 and rep.max_ratio <= 5.5 and elapsed < 120
    verdict(6, "Poincare property suite", ok, f"max ratio {rep.max_ratio:.4f} over {rep.evaluated} samples, "
            f"Q ~ {Q:.3f}; {elapsed:.1f}s")
    assert ok


def test_criterion_7_annulus(verdict):
    rows, ok, ratios = [], True, []
    for eps in (0.3, 0.1, 0.03):
        (f2c, g2c), (f2q, g2q) = annulus_closed_form(eps), annulus_quadrature(eps)
        rel = max(abs(f2q - f2c) / f2c, abs(g2q - g2c) / g2c)
        ok &= rel <= 1e-6
        ratios.append(f2c / g2c)
        rows.append(f"eps={eps}: rel {rel:.1e}")
    ok &= ratios[0] < ratios[1] < ratios[2]
    verdict(7, "annulus closed forms", ok, "; ".join(rows) + "; ratios " + ", ".join(f"{x:.4f}" for x in ratios))
    assert ok


def test_criterion_8_mosco_decay(verdict):
    t0 = time.perf_counter()
    reports = mosco_diagnostic(oracle_disc(0.9), [4, 8, 16, 32])
    ls = [rep.l_n for rep in reports]
    elapsed = time.perf_counter() - t0
    ok = all(b < a for a, b in zip(ls, ls[1:])) and ls[-1] <= 0.12 and elapsed < 60
    verdict(8, "Mosco diagnostic decay", ok, "l(n) = " + ", ".join(f"{x:.4f}" for x in ls) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_9_counterexample(verdict):
    t0 = time.perf_counter()
    rep = fool_demo(oracle_square(0.0, math.pi), 2, [0.2, 0.1, 0.05])
    elapsed = time.perf_counter() - t0
    ok = (
        rep.agreement
        and rep.same_pixelation
        and rep.increasing
        and rep.lambda1[-1] > 2 * rep.base_lambda1
        and elapsed < 300
    )
    verdict(9, "counterexample demo", ok, f"base {rep.base_lambda1:.4f}, thin " + ", ".join(f"{x:.1f}" for x in rep.lambda1)
            + f"; {elapsed:.1f}s")
    assert ok
