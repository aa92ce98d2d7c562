"""Acceptance suite: one test per criterion, tolerances as stated."""

import time

import numpy as np
import pytest
from numpy.polynomial import Polynomial
from scipy.stats import unitary_group

from sectorsum.analysis_checks import mihlin_scan, run_bound_suite
from sectorsum.core_grids import (Field, Params, Tolerances, XFunction, make_t_grid,
                                  make_theta_grid, x_norm)
from sectorsum.fadle_spectra import (eigenvalues_of_minus_l2, find_roots, spectral_constants,
                                     tau_of)
from sectorsum.perturbation_pipeline import (build_rhs, edge_traces, estimate_rho0, forward,
                                             residual, solve, u_evaluator)
from sectorsum.resolvent_theta import domain_traces, oracle_bvp, resolve_a, u_factors
from sectorsum.sum_inverter import build_contour, matrix_contour, matrix_oracle

OMEGAS = (np.pi / 4, np.pi / 2, np.pi)
QUAD_TOL = Tolerances().quad_tol


def random_clamped(omega, rng):
    """``F1 = b P1``, ``F2 = b P2`` with ``b = theta^2 (omega - theta)^2`` and random cubics.

    Returns callables for ``F1, F2, F1''``; the factored form keeps the end
    traces exact in floating point.
    """
    b = Polynomial([0, 0, 1]) * Polynomial([omega, -1]) ** 2 * (2 / omega) ** 4
    P1, P2 = (Polynomial(rng.standard_normal(4)) for _ in range(2))
    db, ddb = b.deriv(), b.deriv(2)
    F1 = lambda x: b(x) * P1(x)
    F2 = lambda x: b(x) * P2(x)
    F1_dd = lambda x: ddb(x) * P1(x) + 2 * db(x) * P1.deriv()(x) + b(x) * P1.deriv(2)(x)
    return F1, F2, F1_dd


# 1
def test_fadle_threshold():
    start = time.perf_counter()
    table = find_roots(10)
    elapsed = time.perf_counter() - start
    assert abs(tau_of(table) - 4.21239) < 1e-4
    assert elapsed < 5


# 2
def test_resolvent_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for omega in OMEGAS:
        grid = make_theta_grid(omega, 128)
        for lam in (-1.0, -10.0, -100.0):
            for _ in range(10):
                F1, F2, F1_dd = random_clamped(omega, rng)
                F = XFunction(F1(grid.nodes), F2(grid.nodes), grid)
                got = resolve_a(lam, F, method="explicit")
                ref = oracle_bvp(lam, F1, F2, 512, omega, grid=grid, F1_dd=F1_dd)
                worst = max(worst, x_norm(got - ref) / x_norm(ref))
    assert worst <= 1e-3, f"worst relative X-norm error {worst:.3e}"
    assert time.perf_counter() - start < 60


# 3
def test_structural_identities():
    rng = np.random.default_rng(3)
    bad = []
    for omega in OMEGAS:
        grid = make_theta_grid(omega, 128)
        for lam in (-1.0, -10.0, -100.0, -1e4, -3 + 40j, 5j, 30 + 1j, -0.05):
            for _ in range(5):
                F1, F2, _ = random_clamped(omega, rng)
                F = XFunction(F1(grid.nodes), F2(grid.nodes), grid)
                out, traces = domain_traces(lam, F, eps0=0.1)
                size = x_norm(out)
                gap = XFunction(np.zeros(grid.n), out.psi2 - lam * out.psi1 - F.psi1, grid)
                if x_norm(gap) > 1e-10 * size:
                    bad.append(("psi2 = lambda psi1 + F1", omega, lam, x_norm(gap) / size))
                worst = max(abs(v) for v in traces.values()) / size
                if worst > 10 * QUAD_TOL:
                    bad.append(("boundary traces", omega, lam, worst))
    assert not bad, bad[:5]


# 4
def test_eigenvalue_consistency():
    table = find_roots(5)
    ratios = []
    for omega in OMEGAS:
        for lam in eigenvalues_of_minus_l2(table, omega)[:5]:
            at = min(abs(u) for u in u_factors(lam, omega))
            off = min(abs(u) for u in u_factors(lam * 1.1, omega))
            ratios.append(at / off)
    assert max(ratios) < 1e-6, (
        f"min(|U1|, |U2|) at lambda_j relative to 1.1 lambda_j ranges over "
        f"[{min(ratios):.3g}, {max(ratios):.3g}]")


# 5
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_mihlin_suprema(r):
    sup_m, sup_d = mihlin_scan(r)
    assert sup_m == pytest.approx(abs(r) / 2, rel=1e-2)
    assert sup_d == pytest.approx(3 * abs(r) / 32, rel=1e-2)


def commuting_pair(rng, d):
    U = unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1)
    Q = U @ (np.eye(d) + 0.3 * rng.standard_normal((d, d)))
    A = np.zeros((d, d), complex)
    B = np.zeros((d, d), complex)
    i = 0
    while i < d:
        k = int(rng.integers(1, min(3, d - i) + 1))
        N = np.diag(np.ones(k - 1), 1)
        a = np.exp(rng.uniform(np.log(0.5), np.log(5))) * np.exp(1j * rng.uniform(-0.18, 0.18))
        b = np.exp(rng.uniform(np.log(0.5), np.log(5))) * np.exp(1j * rng.uniform(-2.5, 2.5))
        A[i:i + k, i:i + k] = a * np.eye(k) + 0.5 * N
        B[i:i + k, i:i + k] = b * np.eye(k) + rng.standard_normal() * 0.5 * N \
            + rng.standard_normal() * 0.5 * N @ N
        i += k
    Qi = np.linalg.inv(Q)
    return Q @ A @ Qi, Q @ B @ Qi


# 6
def test_matrix_oracle():
    rng = np.random.default_rng(7)
    err, deform = 0.0, 0.0
    for _ in range(100):
        M1, M2 = commuting_pair(rng, int(rng.integers(1, 9)))
        X = matrix_oracle(M1, M2, matrix_contour(M1, M2, 0.22))
        Y = matrix_oracle(M1, M2, matrix_contour(M1, M2, 0.28))
        err = max(err, np.abs(X - np.linalg.inv(M1 + M2)).max())
        deform = max(deform, np.abs(X - Y).max())
    assert err < 1e-6 and deform < 1e-6, (err, deform)


# 7
def test_bound_suite():
    rep = run_bound_suite(seed=0)
    assert rep["trials"] >= 500
    assert rep["violations"] == 0
    for slope in rep["decay_slopes"]:
        assert abs(slope + 1) <= 0.1


def manufactured(omega, n_theta, n_t):
    tg, th = make_t_grid(20.0, n_t), make_theta_grid(omega, n_theta)
    T, TH = np.meshgrid(tg.nodes, th.nodes, indexing="ij")
    b = TH ** 2 * (omega - TH) ** 2
    return Field(T ** 2 * np.exp(-T) * b, T ** 2 * np.exp(-1.5 * T) * b * np.cos(TH), tg, th)


# 8
def test_end_to_end_residual():
    start = time.perf_counter()
    omega = np.pi / 2
    table = find_roots(10)
    consts = spectral_constants(omega)
    P1 = Params(omega=omega, k=1.0, rho=1.0)
    ref = manufactured(omega, 128, 128)
    contour = build_contour(P1, consts, table, n_nodes=256)
    rho0 = estimate_rho0(P1, consts, table, forward(ref, P1), contour)
    P = Params(omega=omega, k=1.0, rho=rho0 / 2)
    residuals, steps = [], []
    for n_theta, n_t, n_z in ((32, 32, 64), (64, 64, 128), (128, 128, 256)):
        V = manufactured(omega, n_theta, n_t)
        F = forward(V, P)
        rep = {}
        U = solve(F, P, consts, table, build_contour(P, consts, table, n_nodes=n_z), report=rep)
        residuals.append(residual(U, F, P))
        steps.append(rep["solve"].iterations)
    elapsed = time.perf_counter() - start
    failures = []
    if not residuals[-1] <= 1e-4:
        failures.append(f"reference residual {residuals[-1]:.3e} > 1e-4")
    if not all(b < a for a, b in zip(residuals, residuals[1:])):
        failures.append(f"residuals not decreasing: {residuals}")
    if not max(steps) <= 10:
        failures.append(f"Neumann steps {steps} exceed 10 at rho = rho0/2 = {rho0 / 2:.4g}")
    if not elapsed < 300:
        failures.append(f"runtime {elapsed:.0f} s")
    assert not failures, "; ".join(failures)


def polar_fd_residual(u, f, k, h, r_range, th_range):
    """Fourth-order central differences of ``Delta^2 u - k Delta u - f`` on a polar patch."""
    r = np.arange(r_range[0], r_range[1] + 1e-9, h)
    th = np.arange(th_range[0], th_range[1] + 1e-9, h)
    R, TH = np.meshgrid(r, th, indexing="ij")
    c2 = np.array([-1, 16, -30, 16, -1]) / 12
    c1 = np.array([1, -8, 0, 8, -1]) / 12

    def diff(A, c, axis):
        n = A.shape[axis]
        return sum(c[i] * np.take(A, range(i, n - 4 + i), axis=axis) for i in range(5)) / h ** (
            2 if c is c2 else 1)

    def lap(A, Rg):
        return (diff(A, c2, 0)[:, 2:-2] + diff(A, c1, 0)[:, 2:-2] / Rg[2:-2, 2:-2]
                + diff(A, c2, 1)[2:-2, :] / Rg[2:-2, 2:-2] ** 2)

    L1 = lap(u(R, TH), R)
    L2 = lap(L1, R[2:-2, 2:-2])
    Ri, Ti = R[4:-4, 4:-4], TH[4:-4, 4:-4]
    load = f(Ri * np.cos(Ti), Ri * np.sin(Ti))
    res = L2 - k * L1[2:-2, 2:-2] - load
    return np.sqrt(np.mean(res ** 2)) / np.sqrt(np.mean(load ** 2))


# 9
def test_sector_round_trip():
    omega = np.pi / 2
    table = find_roots(10)
    consts = spectral_constants(omega)
    P = Params(omega=omega, rho=1.0, k=0.5)
    f = lambda x, y: 1 + x * y
    F = build_rhs(f, P, make_t_grid(24.0, 128), make_theta_grid(omega, 128))
    V = solve(F, P, consts, table, build_contour(P, consts, table, n_nodes=256))
    tr = edge_traces(V, P)
    assert tr["u_edge"] <= 1e-4 and tr["dudn_edge"] <= 1e-4 and tr["u_arc"] <= 1e-4, tr
    rel = polar_fd_residual(u_evaluator(V, P), f, P.k, 0.05, (0.3, 0.9), (0.3, 1.27))
    assert rel < 0.05, f"relative FD residual {rel:.3e}"
