"""The angular resolvent ``(A - lambda)^{-1}`` of the clamped fourth-order operator.

``A(psi1, psi2) = (psi2, -(d^2 + 1)^2 psi1 - 2 (d^2 - 1) psi2)`` on ``(0, omega)``
with ``psi1 = psi1' = psi2 = 0`` at both ends.  Solving ``(A - lambda) psi = F``
reduces to ``psi2 = lambda psi1 + F1`` and the clamped problem

    psi1'''' + 2 (lambda + 1) psi1'' + (lambda - 1)^2 psi1 = G,
    G = -F2 - 2 (F1'' - F1) - lambda F1,

whose characteristic roots are ``+/- (sqrt(-lambda) +/- i)``.  The explicit
solution is a particular part ``S`` built from two nested exponential
convolutions plus four homogeneous blocks fixed by the boundary conditions.

All sample arrays carry theta on the last axis, so a stack of right-hand
sides (for example every t-node of a Field) is resolved in one call.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve, solve_banded

from .core_grids import Field, Tolerances, XFunction, kernel_convolution
from .exceptions import ConfigurationError, DomainError, EigenvalueProximityError, PreconditionError

__all__ = [
    "CharRoots", "ResolventIntermediates", "char_roots", "g_lambda", "u_factors",
    "compute_intermediates", "psi1_from", "psi2_from", "solve_direct", "solve_a_zero",
    "resolve_a", "domain_traces", "apply_a", "ode_residual", "oracle_bvp",
]

NEAR_AXIS = 0.5   # omega Re sqrt(-lambda) below which the direct solver is used


@dataclass(frozen=True)
class CharRoots:
    """Roots of ``chi^4 + 2 (1 + lambda) chi^2 + (lambda - 1)^2 = 0``."""

    alpha1: complex
    alpha2: complex
    alpha3: complex
    alpha4: complex
    sqrt_minus_lambda: complex

    def as_array(self):
        return np.array([self.alpha1, self.alpha2, self.alpha3, self.alpha4])

    def residuals(self, lam):
        x = self.as_array()
        return np.abs(x ** 4 + 2 * (1 + lam) * x ** 2 + (lam - 1) ** 2)


@dataclass
class ResolventIntermediates:
    """Every stage of the explicit resolvent for one ``lambda``."""

    roots: CharRoots
    U1: complex
    U2: complex
    betas: tuple
    I_fn: np.ndarray
    v_fn: np.ndarray
    J_fn: np.ndarray
    S_fn: np.ndarray
    G_lambda: np.ndarray
    F1_dd: np.ndarray
    endpoints: dict


def char_roots(lam):
    """Characteristic roots ``alpha_{1,2} = s +/- i``, ``alpha_{3,4} = -alpha_{1,2}``, ``s = sqrt(-lambda)``."""
    lam = complex(lam)
    if lam.imag == 0 and lam.real >= 0:
        raise DomainError(f"lambda = {lam} lies on [0, +inf); use the direct solver")
    s = np.sqrt(-lam)
    a1, a2 = s + 1j, s - 1j
    return CharRoots(a1, a2, -a1, -a2, s)


def _check_clamped(F1, grid, tol):
    d1 = grid.derivative_matrix(1)
    F1 = np.asarray(F1)
    traces = np.stack([F1[..., 0], F1[..., -1], F1 @ d1[0], F1 @ d1[-1]])
    scale = max(1.0, float(np.abs(F1).max(initial=0.0)))
    if np.abs(traces).max(initial=0.0) > tol * scale:
        raise PreconditionError(
            f"F1 must vanish with its derivative at both ends; traces up to "
            f"{np.abs(traces).max():.3g}")


def g_lambda(lam, F1, F2, grid, bc_tol=1e-6, F1_dd=None):
    """``G = -F2 - 2 (F1'' - F1) - lambda F1`` with ``F1''`` from grid derivatives."""
    if bc_tol is not None:
        _check_clamped(F1, grid, bc_tol)
    F1 = np.asarray(F1, dtype=complex)
    if F1_dd is None:
        F1_dd = grid.derivative(F1, 2)
    return -np.asarray(F2) - 2 * (F1_dd - F1) - lam * F1


def u_factors(lam, omega):
    """The boundary determinants ``U1, U2``; their zeros are the eigenvalues of ``A``."""
    s = np.sqrt(-complex(lam))
    e = np.exp(-omega * s)
    return (1 - e * e - 2 * s * e * np.sin(omega), 1 - e * e + 2 * s * e * np.sin(omega))


def _two_sided(alpha, f, grid):
    """Solution of ``y'' - alpha^2 y = f`` with ``y = 0`` at both ends, scaled by ``-2 alpha``.

    Returns ``w`` with ``y = w / (2 alpha)``; shared shape of the v and S formulas.
    """
    omega = grid.omega
    conv = kernel_convolution(alpha, f, grid, axis=-1)
    c0, cw = conv[..., :1], conv[..., -1:]
    e = np.exp(-omega * alpha)
    d = 1 - e * e
    th = grid.nodes
    return (np.exp(-th * alpha) * (c0 - e * cw) + np.exp(-(omega - th) * alpha) * (cw - e * c0)) / d - conv, conv


def compute_intermediates(lam, F1, F2, grid, newton_tol=1e-12, bc_tol=1e-6, F1_dd=None):
    """Run the explicit resolvent pipeline up to the boundary coefficients.

    Raises
    ------
    EigenvalueProximityError
        If ``min(|U1|, |U2|) < newton_tol``.
    """
    roots = char_roots(lam)
    a1, a2 = roots.alpha1, roots.alpha2
    if not (a1.real > 0 and a2.real > 0):
        raise DomainError(f"lambda = {lam} gives Re sqrt(-lambda) = 0")
    F1 = np.asarray(F1, dtype=complex)
    F2 = np.asarray(F2, dtype=complex)
    if F1_dd is None:
        F1_dd = grid.derivative(F1, 2)
    G = g_lambda(lam, F1, F2, grid, bc_tol, F1_dd)
    U1, U2 = u_factors(lam, grid.omega)
    if min(abs(U1), abs(U2)) < newton_tol:
        raise EigenvalueProximityError(
            f"lambda = {lam} is an eigenvalue to within |U| = {min(abs(U1), abs(U2)):.3g}")

    lam = complex(lam)
    q = lam / (a1 * a1 * a2 * a2)
    g = -F2 - 2 * (F1_dd - F1) - lam / (a1 * a1) * F1_dd
    w1, I = _two_sided(a1, g, grid)
    v = w1 / (2 * a1) + q * F1_dd
    w2, J = _two_sided(a2, v, grid)
    S = w2 / (2 * a2) - q * F1

    omega = grid.omega
    s = roots.sqrt_minus_lambda
    J0, Jw = J[..., 0], J[..., -1]
    e1, e2 = np.exp(-omega * a1), np.exp(-omega * a2)
    k = 1 / 4j
    b1 = k / U1 * (1 - e1) / (1 - e2) * (J0 - Jw)
    b2 = -k / U1 * (J0 - Jw)
    b3 = k / U2 * (1 + e1) / (1 + e2) * (J0 + Jw)
    b4 = -k / U2 * (J0 + Jw)
    ends = {"I0": I[..., 0], "Iw": I[..., -1], "J0": J0, "Jw": Jw, "s": s}
    return ResolventIntermediates(roots, U1, U2, (b1, b2, b3, b4), I, v, J, S, G, F1_dd, ends)


def _homogeneous(inter, grid):
    a1, a2 = inter.roots.alpha1, inter.roots.alpha2
    b1, b2, b3, b4 = (np.asarray(b)[..., None] for b in inter.betas)
    th, omega = grid.nodes, grid.omega
    l1, l2 = np.exp(-th * a1), np.exp(-th * a2)
    r1, r2 = np.exp(-(omega - th) * a1), np.exp(-(omega - th) * a2)
    return (l2 * (b1 + b2 + b3 + b4) + r2 * (b3 + b4 - b1 - b2)
            + (l1 - l2) * (b2 + b4) + (r1 - r2) * (b4 - b2))


def _homogeneous_slopes(inter, grid):
    """Derivative of the homogeneous blocks at ``theta = 0`` and ``theta = omega``."""
    a1, a2 = inter.roots.alpha1, inter.roots.alpha2
    b1, b2, b3, b4 = (np.asarray(b) for b in inter.betas)
    B = (b1 + b2 + b3 + b4, b3 + b4 - b1 - b2, b2 + b4, b4 - b2)
    e1, e2 = np.exp(-grid.omega * a1), np.exp(-grid.omega * a2)
    out = []
    for l1, l2, r1, r2 in ((1, 1, e1, e2), (e1, e2, 1, 1)):
        out.append(-a2 * l2 * B[0] + a2 * r2 * B[1] + (-a1 * l1 + a2 * l2) * B[2]
                   + (a1 * r1 - a2 * r2) * B[3])
    return out


def _explicit_slopes(inter, F1, grid):
    """Exact ``psi1'`` at both ends of the explicit formula.

    With ``w`` from ``_two_sided`` and ``c0, cw`` the end values of its
    convolution, ``w'(0) = 2 alpha (e cw - c0) / (1 - e^2)`` and
    ``w'(omega) = 2 alpha (cw - e c0) / (1 - e^2)``.
    """
    a2 = inter.roots.alpha2
    lam = -inter.roots.sqrt_minus_lambda ** 2
    q = lam / (inter.roots.alpha1 ** 2 * a2 ** 2)
    e = np.exp(-grid.omega * a2)
    d = 1 - e * e
    J0, Jw = inter.endpoints["J0"], inter.endpoints["Jw"]
    d1 = grid.derivative_matrix(1)
    F1 = np.asarray(F1, dtype=complex)
    h0, hw = _homogeneous_slopes(inter, grid)
    return (h0 + (e * Jw - J0) / d - q * (F1 @ d1[0]),
            hw + (Jw - e * J0) / d - q * (F1 @ d1[-1]))


def psi1_from(inter, lam, grid):
    """``psi1``: the four homogeneous exponential blocks plus the particular part ``S``."""
    return _homogeneous(inter, grid) + inter.S_fn


def psi2_from(inter, lam, F1, grid):
    """``psi2`` from its own block expansion; equals ``lambda psi1 + F1``."""
    lam = complex(lam)
    a1, a2 = inter.roots.alpha1, inter.roots.alpha2
    F1 = np.asarray(F1, dtype=complex)
    w2 = inter.S_fn + lam / (a1 * a1 * a2 * a2) * F1
    return lam * _homogeneous(inter, grid) + lam * w2 + (1 - lam * lam / (a1 * a1 * a2 * a2)) * F1


def _collocation_matrix(lam, grid):
    d1, d2, d4 = (grid.derivative_matrix(k) for k in (1, 2, 4))
    n = grid.n
    m = d4 + 2 * (1 + lam) * d2 + (lam - 1) ** 2 * np.eye(n)
    m = m.astype(complex)
    m[0] = 0
    m[0, 0] = 1
    m[-1] = 0
    m[-1, -1] = 1
    m[1] = d1[0]
    m[-2] = d1[-1]
    return m


def solve_direct(lam, F1, F2, grid, bc_tol=1e-6, F1_dd=None):
    """Collocation solve of the clamped problem; returns ``(psi1, psi2)`` arrays.

    The fourth-order equation is imposed at interior nodes 2..n-3; the rows
    next to each end carry the conditions ``psi1 = psi1' = 0``.
    """
    lam = complex(lam)
    F1 = np.asarray(F1, dtype=complex)
    G = g_lambda(lam, F1, F2, grid, bc_tol, F1_dd)
    m = _collocation_matrix(lam, grid)
    rhs = np.array(G, dtype=complex, copy=True)
    rhs[..., [0, 1, -2, -1]] = 0
    lu = lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() < 1e-13 * pivots.max():
        raise EigenvalueProximityError(f"collocation matrix is singular at lambda = {lam}")
    flat = rhs.reshape(-1, grid.n).T
    psi1 = lu_solve(lu, flat, check_finite=False).T.reshape(rhs.shape)
    return psi1, lam * psi1 + F1


def solve_a_zero(F1, F2, grid, bc_tol=1e-6):
    """``A^{-1} F`` by direct collocation; ``psi2`` is ``F1`` itself."""
    psi1, _ = solve_direct(0.0, F1, F2, grid, bc_tol)
    return XFunction(psi1, np.array(F1, dtype=complex, copy=True), grid, in_domain=True)


def _resolve_arrays(lam, F1, F2, grid, eps0, newton_tol, method, bc_tol, slopes=False):
    lam = complex(lam)
    if method not in ("auto", "explicit", "direct"):
        raise ConfigurationError(f"unknown method {method!r}")
    small = abs(lam) < eps0
    near_axis = grid.omega * np.sqrt(-lam).real < NEAR_AXIS
    if not small:
        U1, U2 = u_factors(lam, grid.omega)
        if min(abs(U1), abs(U2)) < newton_tol:
            raise EigenvalueProximityError(
                f"lambda = {lam} is an eigenvalue to within |U| = {min(abs(U1), abs(U2)):.3g}")
    if method == "direct" or (method == "auto" and (small or near_axis)):
        psi1, psi2 = solve_direct(lam, F1, F2, grid, bc_tol)
        if slopes:
            d1 = grid.derivative_matrix(1)
            return psi1, psi2, (psi1 @ d1[0], psi1 @ d1[-1])
        return psi1, psi2
    if lam.imag == 0 and lam.real >= 0:
        raise DomainError(f"lambda = {lam} lies on the branch cut of the explicit formula")
    inter = compute_intermediates(lam, F1, F2, grid, newton_tol, bc_tol)
    psi1, psi2 = psi1_from(inter, lam, grid), psi2_from(inter, lam, F1, grid)
    if slopes:
        return psi1, psi2, _explicit_slopes(inter, F1, grid)
    return psi1, psi2


def resolve_a(lam, F, grid=None, eps0=1.0, newton_tol=None, method="auto", bc_tol=1e-6):
    """``(A - lambda)^{-1} F`` for an XFunction or a Field.

    Parameters
    ----------
    lam : complex
    F : XFunction or Field
        For a Field every t-node is resolved at once.
    grid : ThetaGrid, optional
        Defaults to the grid carried by ``F``.
    eps0 : float
        Below this modulus the direct collocation solver is used.
    newton_tol : float, optional
        Eigenvalue proximity threshold on ``min(|U1|, |U2|)``.
    method : {"auto", "explicit", "direct"}
        ``"auto"`` uses the explicit formula except near 0 or near [0, +inf).
    """
    if newton_tol is None:
        newton_tol = Tolerances().newton_tol
    if isinstance(F, Field):
        grid = F.theta_grid if grid is None else grid
        p1, p2 = _resolve_arrays(lam, F.psi1, F.psi2, grid, eps0, newton_tol, method, bc_tol)
        return F.like(p1, p2, F.vanishing)
    grid = F.grid if grid is None else grid
    p1, p2 = _resolve_arrays(lam, F.psi1, F.psi2, grid, eps0, newton_tol, method, bc_tol)
    return XFunction(p1, p2, grid, in_domain=True)


def domain_traces(lam, F, grid=None, eps0=1.0, newton_tol=None, method="auto", bc_tol=1e-6):
    """Resolve ``(A - lambda)^{-1} F`` and report its clamped-end traces.

    Returns the XFunction and a dict with ``psi1``, ``psi1'`` and ``psi2`` at
    ``theta = 0`` and ``theta = omega``.  On the explicit path ``psi1'`` at the
    ends is evaluated from the formula itself; on the collocation path it is
    the boundary row of the derivative matrix, which the solver enforces.
    """
    if newton_tol is None:
        newton_tol = Tolerances().newton_tol
    grid = F.grid if grid is None else grid
    p1, p2, (s0, sw) = _resolve_arrays(lam, F.psi1, F.psi2, grid, eps0, newton_tol, method,
                                       bc_tol, slopes=True)
    traces = {"psi1_0": p1[0], "psi1_omega": p1[-1], "dpsi1_0": s0, "dpsi1_omega": sw,
              "psi2_0": p2[0], "psi2_omega": p2[-1]}
    return XFunction(p1, p2, grid, in_domain=True), traces


def apply_a(psi1, psi2, grid):
    """Forward operator ``A`` on sample arrays (theta on the last axis)."""
    d2 = grid.derivative(psi1, 2)
    d4 = grid.derivative(psi1, 4)
    return psi2, -(d4 + 2 * d2 + psi1) - 2 * (grid.derivative(psi2, 2) - psi2)


def ode_residual(lam, psi1, G, grid):
    """``psi1'''' + 2 (lambda + 1) psi1'' + (lambda - 1)^2 psi1 - G``."""
    return (grid.derivative(psi1, 4) + 2 * (lam + 1) * grid.derivative(psi1, 2)
            + (lam - 1) ** 2 * psi1 - G)


# independent finite-difference oracle

def _fd_solve(lam, g, h, singular_tol):
    """Second-order ghost-point scheme on uniform interior nodes, clamped ends."""
    m = len(g)
    c4 = 1 / h ** 4
    c2 = 2 * (lam + 1) / h ** 2
    c0 = (lam - 1) ** 2
    ab = np.zeros((5, m), dtype=complex)
    ab[0, 2:] = c4
    ab[1, 1:] = -4 * c4 + c2
    ab[2, :] = 6 * c4 - 2 * c2 + c0
    ab[3, :-1] = -4 * c4 + c2
    ab[4, :-2] = c4
    ab[2, 0] += c4       # ghost value psi_{-1} = psi_1
    ab[2, -1] += c4
    # smooth probe: near an eigenvalue the inverse amplifies the low modes
    x = np.arange(1, m + 1) / (m + 1)
    probe = np.sin(np.pi * x) + 0.5 * np.sin(2 * np.pi * x) + 0.25 * np.sin(3 * np.pi * x)
    growth = (np.linalg.norm(solve_banded((2, 2), ab, probe)) / np.linalg.norm(probe)
              * (1 + abs(lam)) ** 2)
    if not np.isfinite(growth) or growth > singular_tol:
        raise EigenvalueProximityError(
            f"finite-difference operator is near singular at lambda = {lam} "
            f"(scaled inverse growth {growth:.3g})")
    return solve_banded((2, 2), ab, g)


def oracle_bvp(lam, F1, F2, n, omega, grid=None, F1_dd=None, singular_tol=1e3):
    """Brute-force reference for ``(A - lambda)^{-1}`` used to validate the solvers.

    A pentadiagonal second-order finite-difference solve on ``n`` and
    ``2n - 1`` uniform points, combined by Richardson extrapolation.  The
    discretization error falls like ``n^-4`` while roundoff grows like
    ``n^4 eps``, so a coarse size of a few hundred is the useful range.

    Parameters
    ----------
    lam : complex
    F1, F2 : callable
        Data as functions of theta.
    n : int
        Coarse grid size.
    omega : float
    grid : ThetaGrid, optional
        If given, the result is interpolated onto its nodes.
    F1_dd : callable, optional
        Exact ``F1''``; otherwise a centered difference of ``F1`` is used.
    singular_tol : float
        Largest tolerated ``(1 + |lambda|)^2 |M^{-1} b| / |b|`` for a smooth probe ``b``.
    """
    lam = complex(lam)
    if n < 8:
        raise ConfigurationError("oracle needs n >= 8")
    if F1_dd is None:
        eps = 1e-4

        def F1_dd(x):
            return (F1(x + eps) - 2 * F1(x) + F1(x - eps)) / eps ** 2

    sols = []
    for m in (n, 2 * n - 1):
        x = np.linspace(0.0, omega, m)
        G = -F2(x) - 2 * (F1_dd(x) - F1(x)) - lam * F1(x)
        psi = np.zeros(m, dtype=complex)
        psi[1:-1] = _fd_solve(lam, np.asarray(G[1:-1], dtype=complex), x[1] - x[0], singular_tol)
        sols.append(psi)
    x = np.linspace(0.0, omega, n)
    psi1 = (4 * sols[1][::2] - sols[0]) / 3
    if grid is None:
        from .core_grids import ThetaGrid
        grid, nodes = ThetaGrid(x, omega), x
    else:
        nodes = grid.nodes
        psi1 = CubicSpline(x, psi1, bc_type="clamped")(nodes)
    return XFunction(psi1, lam * psi1 + F1(nodes), grid, in_domain=True)
