"""Numerical checks of the quantitative inequalities behind the solution theory.

Each check evaluates both sides of an inequality on seeded random admissible
data and reports the worst ratio ``lhs / rhs`` together with the data of
every violation.

- ``mihlin_scan``: suprema of the imaginary-power multiplier
  ``m(xi) = (l2^{ir} - l1^{ir}) / (8 pi xi)``,
  ``l1,2 = 2 +- 4 pi xi + 4 pi^2 xi^2``.
- ``kato_convexity_check``: the half-line and interval convexity inequalities.
- ``bound_scan_a``: the estimates on the intermediate functions ``I``, ``v``,
  ``J``, the kernel differences and the boundary coefficients of the
  explicit theta-resolvent, plus the ``1/|lambda|`` decay of the resolvent.
- ``bound_scan_l1``: ``||(L1 - lambda)^{-1} R|| <= 4 / (sin(eps) |lambda|) ||R||``.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.polynomial import Polynomial

from .core_grids import (Field, Grid, XFunction, field_norm, lp_norm, make_t_grid,
                         make_theta_grid, x_norm)
from .exceptions import ConfigurationError, PreconditionError
from .fadle_spectra import SpectralConstants, default_eps0, in_sigma_l1
from .resolvent_t import resolve_l1
from .resolvent_theta import compute_intermediates, resolve_a

__all__ = [
    "mihlin_multiplier", "mihlin_xi_derivative", "mihlin_scan",
    "kato_convexity_check", "half_line_ratio", "random_clamped_pair", "bound_scan_a",
    "bound_scan_l1",
    "run_bound_suite",
]

SLACK = 1e-6   # relative allowance for quadrature error on the right-hand sides


# multiplier suprema

def _powers(r, xi):
    l1 = 2 + 4 * np.pi * xi + 4 * np.pi ** 2 * xi ** 2
    l2 = 2 - 4 * np.pi * xi + 4 * np.pi ** 2 * xi ** 2
    return l1, l2, l1 ** (1j * r), l2 ** (1j * r)


def mihlin_multiplier(r, xi):
    """``m(xi)`` for ``xi != 0``."""
    xi = np.asarray(xi, dtype=float)
    _, _, a1, a2 = _powers(r, xi)
    return (a2 - a1) / (8 * np.pi * xi)


def mihlin_xi_derivative(r, xi, exact=False):
    """``xi m'(xi)`` for ``xi != 0``.

    By default this is the closed form used in the boundedness argument,

        (ir/32) (l2^{ir-1} (2 pi xi - 1) - l1^{ir-1} (2 pi xi + 1))
            - (l2^{ir} - l1^{ir}) / (32 pi xi),

    whose limit at 0 is ``3 2^{ir-5} ir``.  With ``exact=True`` it is the
    true derivative of ``m``, in which the coefficients are ``ir/2`` and
    ``1/(8 pi xi)`` and the limit at 0 is 0.
    """
    xi = np.asarray(xi, dtype=float)
    l1, l2, a1, a2 = _powers(r, xi)
    c, d = (1 / 2, 8) if exact else (1 / 32, 32)
    return (1j * r * c * (a2 / l2 * (2 * np.pi * xi - 1) - a1 / l1 * (2 * np.pi * xi + 1))
            - (a2 - a1) / (d * np.pi * xi))


def mihlin_scan(r, xi_max=1e4, n=20000, xi_min=1e-6, report=None):
    """Suprema of ``|m|`` and of the closed-form ``|xi m'|`` over ``xi`` in R.

    The grid is log-spaced in ``xi_min <= |xi| <= xi_max`` on both sides;
    the values at ``xi = 0``, ``-2^{ir-1} ir`` and ``3 2^{ir-5} ir``, are
    added analytically.  If ``report`` is a dict it also receives the
    supremum of the exact ``|xi m'|`` and the maximizing points.

    Returns
    -------
    sup_m, sup_xim : float
    """
    if n < 1000:
        raise ConfigurationError(f"mihlin_scan needs n >= 1000, got {n}")
    if not 0 < xi_min < xi_max:
        raise ConfigurationError("need 0 < xi_min < xi_max")
    half = np.logspace(np.log10(xi_min), np.log10(xi_max), n // 2)
    xi = np.concatenate([-half[::-1], half])
    m = np.abs(mihlin_multiplier(r, xi))
    d = np.abs(mihlin_xi_derivative(r, xi))
    m0 = abs(-(2.0 ** (1j * r - 1)) * 1j * r)
    d0 = abs(3 * 2.0 ** (1j * r - 5) * 1j * r)
    sup_m = max(float(m.max()), m0)
    sup_d = max(float(d.max()), d0)
    if report is not None:
        exact = np.abs(mihlin_xi_derivative(r, xi, exact=True))
        report.update({
            "r": r, "sup_m": sup_m, "sup_xim_closed_form": sup_d,
            "sup_xim_exact": float(exact.max()),
            "argmax_m": float(xi[m.argmax()]) if m.max() >= m0 else 0.0,
            "argmax_xim_exact": float(xi[exact.argmax()]),
            "expected": (abs(r) / 2, 3 * abs(r) / 32),
        })
    return sup_m, sup_d


# convexity inequalities

def _exp_poly_norms(coeffs, a, grid, p):
    """L^p norms of ``g, g', g''`` for ``g = P(t) exp(-a t)`` on ``grid``."""
    P = Polynomial(coeffs)
    t = grid.nodes
    e = np.exp(-a * t)
    parts = [P, P.deriv() - a * P, P.deriv(2) - 2 * a * P.deriv() + a * a * P]
    return [lp_norm(q(t) * e, grid, p) for q in parts]


def _half_line_grid(t_max, n_t):
    return Grid(t_max * np.linspace(0, 1, n_t) ** 2)


def half_line_ratio(coeffs, a, p=2.0, t_max=60.0, n_t=4000):
    """``||V'|| / (2 sqrt(2) ||V||^{1/2} ||V''||^{1/2})`` for ``V = P(t) exp(-a t)``.

    ``coeffs`` are the power-basis coefficients of ``P``; the inequality
    holds when the ratio is at most 1.
    """
    n0, n1, n2 = _exp_poly_norms(coeffs, a, _half_line_grid(t_max, n_t), p)
    return n1 / (2 * np.sqrt(2) * np.sqrt(n0 * n2)) if n0 * n2 > 0 else 0.0


def kato_convexity_check(samples=100, p=2.0, omega=np.pi / 2, seed=0, t_max=60.0, n_t=4000):
    """Evaluate both convexity inequalities on random smooth samples.

    Half line: ``||V'|| <= 2 sqrt(2) ||V||^{1/2} ||V''||^{1/2}`` for
    ``V = P(t) exp(-a t)`` with ``P(0) = 0``.  Interval:
    ``||phi'|| <= (omega/eta) ||phi''|| + (2/omega)(eta + 3 + 2/eta) ||phi||``
    for polynomial ``phi`` vanishing at both ends, at a random ``eta`` and at
    the minimizing ``eta``.  All derivatives are exact.

    Returns
    -------
    dict
        ``max_ratio_half_line`` and ``max_ratio_interval`` (must be at most
        1 + SLACK), the seed and any violations.
    """
    rng = np.random.default_rng(seed)
    tg = _half_line_grid(t_max, n_t)
    th = make_theta_grid(omega, 400, clustering=0.0)
    x = th.nodes
    worst_h, worst_i = 0.0, 0.0
    bad = []
    for k in range(samples):
        deg = rng.integers(1, 6)
        coeffs = np.concatenate([[0.0], rng.standard_normal(deg)])
        a = rng.uniform(0.3, 3.0)
        n0, n1, n2 = _exp_poly_norms(coeffs, a, tg, p)
        ratio = n1 / (2 * np.sqrt(2) * np.sqrt(n0 * n2)) if n0 * n2 > 0 else 0.0
        worst_h = max(worst_h, ratio)
        if ratio > 1 + SLACK:
            bad.append({"kind": "half_line", "sample": k, "coeffs": coeffs.tolist(),
                        "a": a, "ratio": ratio})

        base = Polynomial([0, 0, 1]) * Polynomial([omega, -1]) ** 2 \
            if rng.random() < 0.5 else Polynomial([0, 1]) * Polynomial([omega, -1])
        phi = base * Polynomial(rng.standard_normal(rng.integers(1, 6)))
        f0 = lp_norm(phi(x), th, p)
        f1 = lp_norm(phi.deriv()(x), th, p)
        f2 = lp_norm(phi.deriv(2)(x), th, p)
        eta_opt = np.sqrt(2) * np.sqrt(f2 + 4 * f0) / (2 * np.sqrt(f0))
        for eta in (np.exp(rng.uniform(np.log(1e-2), np.log(1e2))), eta_opt):
            rhs = omega / eta * f2 + 2 / omega * (eta + 3 + 2 / eta) * f0
            ratio = f1 / rhs
            worst_i = max(worst_i, ratio)
            if ratio > 1 + SLACK:
                bad.append({"kind": "interval", "sample": k, "coeffs": phi.coef.tolist(),
                            "eta": float(eta), "ratio": float(ratio)})
    return {"seed": seed, "samples": samples, "p": p, "omega": omega,
            "max_ratio_half_line": float(worst_h), "max_ratio_interval": float(worst_i),
            "violations": bad, "passed": not bad}


# resolvent bounds for A

def random_clamped_pair(omega, rng, max_terms=4):
    """Random polynomials ``F1, F2`` in the basis ``theta^a (omega - theta)^b``, ``a, b >= 2``.

    Returns ``(F1, F2)`` as numpy Polynomials, both clamped at 0 and omega.
    """
    out = []
    for _ in range(2):
        total = Polynomial([0.0])
        for _ in range(rng.integers(1, max_terms + 1)):
            a, b = rng.integers(2, 6, size=2)
            term = Polynomial([0, 1]) ** int(a) * Polynomial([omega, -1]) ** int(b)
            total = total + rng.standard_normal() * term / np.abs(term(
                np.linspace(0, omega, 64))).max()
        out.append(total)
    return tuple(out)


def _a_bound_trial(lam, omega, p, eps0, grid, F1p, F2p):
    x = grid.nodes
    F1, F2, F1dd = F1p(x), F2p(x), F1p.deriv(2)(x)
    inter = compute_intermediates(lam, F1, F2, grid, F1_dd=F1dd, bc_tol=None)
    s = np.sqrt(-lam)
    size = lp_norm(F2, grid, p) + 2 * lp_norm(F1, grid, p) + 3 * lp_norm(F1dd, grid, p)
    a1, a2 = inter.roots.alpha1, inter.roots.alpha2
    ends = inter.endpoints
    nI = lp_norm(inter.I_fn, grid, p)
    nv = lp_norm(inter.v_fn, grid, p)
    nJ = lp_norm(inter.J_fn, grid, p)
    M1_lam = 2 + 2 / (1 - np.exp(-2 * omega * s))
    se = np.sqrt(eps0)
    h0 = 1 - np.exp(-2 * omega * se) - 2 * omega * se * np.exp(-omega * se)
    M1 = 2 + 2 / (1 - np.exp(-2 * omega * se))
    b1, b2, b3, b4 = (complex(b) for b in inter.betas)
    fine = make_theta_grid(omega, 2001, clustering=0.0)
    y = fine.nodes
    k1 = lp_norm(np.exp(-y * a1) - np.exp(-y * a2), fine, p)
    k2 = lp_norm(np.exp(-(omega - y) * a1) - np.exp(-(omega - y) * a2), fine, p)
    checks = {
        "I_lp": (nI, 2 / s * size),
        "I_ends": (abs(ends["I0"]) + abs(ends["Iw"]), 2 / s ** (1 - 1 / p) * size),
        "v_lp": (nv, M1_lam / (-lam) * size),
        "J_lp": (nJ, 2 / s * nv),
        "J_ends": (abs(ends["J0"]) + abs(ends["Jw"]), 2 / s ** (1 - 1 / p) * nv),
        "kernel_diff_left": (k1, 4 / s ** (1 + 1 / p)),
        "kernel_diff_right": (k2, 4 / s ** (1 + 1 / p)),
        "beta_sum": (max(abs(b1 + b2), abs(b3 + b4)),
                         M1 * size / (omega * (-lam) * s ** (2 - 1 / p) * h0
                                      * (1 - np.exp(-omega * se)))),
        "beta_single": (max(abs(b2), abs(b4)),
                            M1 * size / (2 * (-lam) * s ** (1 - 1 / p) * h0)),
    }
    return {k: (float(a), float(b)) for k, (a, b) in checks.items()}


def _resolvent_gain(lam, grid, F1p, F2p, eps0, p):
    x = grid.nodes
    F = XFunction(F1p(x), F2p(x), grid, in_domain=False)
    R = resolve_a(lam, F, eps0=eps0, bc_tol=None)
    return x_norm(R, p=p) / x_norm(F, p=p)


def bound_scan_a(lambdas, trials=20, omega=np.pi / 2, p=2.0, seed=0, n_theta=128,
                 eps0=None, decay_exponents=(2, 3, 4, 5), workers=1):
    """Check the estimates of the explicit theta-resolvent on random data.

    Parameters
    ----------
    lambdas : sequence of float
        Real values ``<= -eps0``.
    trials : int
        Random ``F`` per ``lambda``.
    decay_exponents : sequence of int
        The decay fit uses ``lambda = -10^k`` for these ``k``; the default
        window starts above the lowest eigenvalues, where the decay is
        asymptotic.

    Returns
    -------
    dict
        Worst ratio per check, all violations with their data, the fitted
        slope of ``log ||(A - lambda)^{-1} F|| / ||F||`` against
        ``log |lambda|`` and the measured ``max (1 + |lambda|) ||(A - lambda)^{-1} F|| / ||F||``.
    """
    eps0 = default_eps0(omega) if eps0 is None else eps0
    lambdas = [float(l) for l in lambdas]
    if any(l > -eps0 for l in lambdas):
        raise PreconditionError(f"bound_scan_a needs lambda <= -eps0 = {-eps0:.4g}")
    grid = make_theta_grid(omega, n_theta)
    seeds = np.random.SeedSequence(seed).spawn(len(lambdas) * trials + 1)
    jobs = [(lam, seeds[i * trials + j]) for i, lam in enumerate(lambdas) for j in range(trials)]

    def run(job):
        lam, ss = job
        F1p, F2p = random_clamped_pair(omega, np.random.default_rng(ss))
        return lam, F1p, F2p, _a_bound_trial(lam, omega, p, eps0, grid, F1p, F2p)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    worst = {}
    bad = []
    for idx, (lam, F1p, F2p, checks) in enumerate(results):
        for name, (lhs, rhs) in checks.items():
            ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
            worst[name] = max(worst.get(name, 0.0), ratio)
            if lhs > rhs * (1 + SLACK):
                bad.append({"check": name, "lambda": lam, "trial": idx, "lhs": lhs, "rhs": rhs,
                            "F1_coeffs": F1p.coef.tolist(), "F2_coeffs": F2p.coef.tolist()})

    F1p, F2p = random_clamped_pair(omega, np.random.default_rng(seeds[-1]))
    lam_fit = -10.0 ** np.asarray(decay_exponents, dtype=float)
    gains = np.array([_resolvent_gain(l, grid, F1p, F2p, eps0, p) for l in lam_fit])
    slope = float(np.polyfit(np.log(-lam_fit), np.log(gains), 1)[0])
    return {
        "omega": omega, "p": p, "seed": seed, "eps0": eps0, "trials": len(results),
        "lambdas": lambdas, "worst_ratio": worst, "violations": bad,
        "decay_lambdas": lam_fit.tolist(), "decay_gains": gains.tolist(),
        "decay_slope": slope, "measured_M": float(np.max((1 - lam_fit) * gains)),
        "passed": not bad and abs(slope + 1) <= 0.1,
    }


# resolvent bound for L1

def _random_field(tgrid, theta_grid, rng):
    F1p, F2p = random_clamped_pair(theta_grid.omega, rng, max_terms=2)
    coeffs = rng.standard_normal(rng.integers(1, 4))
    a = rng.uniform(0.5, 2.0)
    t = tgrid.nodes
    g = Polynomial(np.concatenate([[0.0], coeffs]))(t) * np.exp(-a * t)
    x = theta_grid.nodes
    return Field(np.outer(g, F1p(x)), np.outer(g, F2p(x)), tgrid, theta_grid)


def bound_scan_l1(lambdas, trials=20, mu=0.0, eps=0.1, p=2.0, seed=0, n_t=160,
                  n_theta=24, omega=np.pi / 2, t_max=None):
    """Check ``||(L1 - lambda)^{-1} R|| <= (4 / sin eps) ||R|| / |lambda|`` on random ``R``.

    Raises
    ------
    PreconditionError
        If a ``lambda`` lies outside the sector ``|arg| <= pi - 2 eps``,
        ``|lambda| >= 4 mu^2 / sin^2 eps``.
    """
    consts = SpectralConstants(eps_l1=eps, eps_l2=max(0.3, 2 * eps + 0.1))
    lambdas = [complex(l) for l in lambdas]
    for lam in lambdas:
        if not in_sigma_l1(lam, mu, consts):
            raise PreconditionError(f"lambda = {lam} is outside the sector of the bound")
    M = 4 / np.sin(eps)
    rates = [np.sqrt(l).real - abs(mu) for l in lambdas]
    if t_max is None:
        t_max = max(30.0, 30.0 / min(rates))
    tg = make_t_grid(t_max, n_t)
    th = make_theta_grid(omega, n_theta)
    seeds = np.random.SeedSequence(seed).spawn(len(lambdas) * trials)
    worst = 0.0
    bad = []
    for i, lam in enumerate(lambdas):
        for j in range(trials):
            R = _random_field(tg, th, np.random.default_rng(seeds[i * trials + j]))
            V = resolve_l1(lam, R, mu, residual_tol=np.inf)
            lhs = field_norm(V, p)
            rhs = M / abs(lam) * field_norm(R, p)
            worst = max(worst, lhs / rhs)
            if lhs > rhs * (1 + SLACK):
                bad.append({"lambda": [lam.real, lam.imag], "trial": j, "lhs": lhs, "rhs": rhs})
    return {"mu": mu, "eps": eps, "M": M, "p": p, "seed": seed, "trials": len(lambdas) * trials,
            "worst_ratio": worst, "violations": bad, "passed": not bad}


def run_bound_suite(seed=0, workers=1):
    """The default randomized sweep over both resolvent bounds (585 trials)."""
    reports = []
    for omega in (np.pi / 4, np.pi / 2, np.pi):
        eps0 = default_eps0(omega)
        lams = [-eps0 * f for f in (1.0, 2.0, 10.0, 100.0, 1000.0)]
        reports.append(bound_scan_a(lams, trials=30, omega=omega, seed=seed, workers=workers))
    l1 = []
    for mu, eps in ((0.0, 0.1), (1.0, 0.1), (2.0, 0.3)):
        floor = 4 * mu * mu / np.sin(eps) ** 2
        mods = [max(floor, 1.0) * f for f in (1.001, 3.0, 30.0)]
        angles = (0.0, 0.5 * (np.pi - 2 * eps), np.pi - 2 * eps - 1e-3)
        lams = [m * np.exp(1j * s * a) for m in mods for a in angles for s in (1, -1)
                if not (a == 0.0 and s == -1)]
        l1.append(bound_scan_l1(lams, trials=3, mu=mu, eps=eps, seed=seed))
    trials = sum(r["trials"] for r in reports) + sum(r["trials"] for r in l1)
    return {"seed": seed, "trials": trials, "a": reports, "l1": l1,
            "violations": sum(len(r["violations"]) for r in reports + l1),
            "decay_slopes": [r["decay_slope"] for r in reports],
            "passed": all(r["passed"] for r in reports + l1)}
