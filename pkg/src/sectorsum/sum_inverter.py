"""Inverse of the operator sum by a resolvent contour integral.

For commuting ``M1`` and ``M2`` whose spectra ``sigma(M1)`` and ``sigma(-M2)``
are separated by a path ``Gamma`` enclosing ``sigma(M1)`` counterclockwise,

    (M1 + M2)^{-1} = 1/(2 pi i) int_Gamma (M1 - z)^{-1} (-M2 - z)^{-1} dz.

For the sector problem ``M1 = L1`` (spectrum around the negative axis) and
``M2 = -A`` (eigenvalues of ``A`` to the right), so the integrand is
``(L1 - z)^{-1} (A - z)^{-1}``.

The path is the image under ``z = sign * w^2`` of the hyperbola

    w(y) = c0 + tan(theta0 / 2) (sqrt(y^2 + b^2) - b) + i y,

whose ends go to infinity along ``arg z = +/- (pi - theta0)`` (for ``sign = 1``).
It is parametrized by ``y = beta sinh(u)``; the integrand decays like
``exp(-2 |u|)``.  Matrix pairs use composite Gauss-Legendre panels in ``u``.
The sector problem uses the trapezoidal rule, because its integrand is
analytic only in a strip of half-width about ``tan(theta0 / 2)`` around the
real ``u`` axis, where the trapezoidal rule converges geometrically.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core_grids import XFunction
from .exceptions import ConfigurationError, PreconditionError, SpectralViolationError
from .fadle_spectra import check_condition, operator_eigenvalues, tau_of
from .resolvent_t import l1_admissible, resolve_l1
from .resolvent_theta import apply_a as _apply_a_arrays
from .resolvent_theta import resolve_a

__all__ = ["Contour", "make_contour", "separating_contour", "build_contour", "invert_sum",
           "apply_a", "matrix_oracle", "matrix_contour"]

PANEL = 8
CHUNK = 16   # contour nodes per partial sum
# Truncation constant for the PDE path.  The value of V has a tail of about
# 1/|z_end|, but A V (part of the solution norm) carries boundary layers of
# width |z|^-1/2 whose tail is measured at about 6e3/|z_end| for smooth loads.
GRAPH_TAIL = 1e4


@dataclass
class Contour:
    """Quadrature on the separating path: ``int g dz ~ sum(weights * g(nodes))``."""

    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    theta0: float
    c0: float
    b: float
    beta: float
    u_max: float
    sign: int = 1
    segments: list = field(default_factory=list)

    @property
    def R0(self):
        """Modulus of the point where the path crosses the real axis."""
        return self.c0 ** 2

    @property
    def truncation(self):
        """Largest ``|z|`` reached by the truncated path."""
        return float(np.abs(self.quad_nodes).max())

    @property
    def n(self):
        return len(self.quad_nodes)

    def sqrt_coordinates(self, z):
        """``(x, y, x_path(y))`` for the point ``sqrt(sign * z)``."""
        zeta = np.sqrt(self.sign * np.asarray(z, dtype=complex))
        x, y = zeta.real, zeta.imag
        return x, y, self.c0 + np.tan(self.theta0 / 2) * (np.sqrt(y * y + self.b ** 2) - self.b)

    def encloses(self, z):
        """Whether ``z`` lies on the enclosed (``M1``) side of the path."""
        x, _, xp = self.sqrt_coordinates(z)
        return x < xp

    def to_dict(self):
        return {"theta0": self.theta0, "c0": self.c0, "b": self.b, "beta": self.beta,
                "u_max": self.u_max, "sign": self.sign, "n": self.n, "R0": self.R0,
                "truncation": self.truncation, "segments": self.segments,
                "nodes_re": self.quad_nodes.real.tolist(),
                "nodes_im": self.quad_nodes.imag.tolist()}


def _path(u, theta0, c0, b, beta):
    a = np.tan(theta0 / 2)
    y = beta * np.sinh(u)
    r = np.sqrt(y * y + b * b)
    return c0 + a * (r - b) + 1j * y, (a * y / r + 1j) * beta * np.cosh(u)


def _panel_edges(n_panels, u_max, theta0, c0, b, beta, points, reach):
    """Panel edges equidistributing ``1 / min(1, dist / |dw/du|)``.

    ``dist`` is the distance from the path (in the square-root plane) to the
    nearest spectral point or to the line ``Re w = reach``.
    """
    if points is None and reach is None:
        return np.linspace(-u_max, u_max, n_panels + 1)
    u = np.linspace(-u_max, u_max, 20001)
    w, dw = _path(u, theta0, c0, b, beta)
    dist = np.full(u.shape, np.inf)
    if points is not None and len(points):
        dist = np.abs(w[:, None] - np.asarray(points)[None, :]).min(axis=1)
    if reach is not None:
        dist = np.minimum(dist, w.real - reach)
    density = 1.0 / np.minimum(1.0, 0.5 * dist / np.abs(dw))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(u))])
    edges = np.interp(np.linspace(0.0, cum[-1], n_panels + 1), cum, u)
    edges[0], edges[-1] = -u_max, u_max
    return edges


def make_contour(theta0, c0, b=1.0, beta=1.0, u_max=12.0, n_nodes=256, sign=1,
                 points=None, reach=None, rule="gauss"):
    """Quadrature on the hyperbolic path.

    Parameters
    ----------
    rule : {"gauss", "trapezoid"}
        Composite Gauss-Legendre panels (refined near ``points``) or the
        uniform trapezoidal rule in ``u``, which is the better choice when
        the integrand is analytic in a strip of fixed width.
    points : array_like, optional
        Spectral points in the ``sqrt(sign z)`` plane; panels are refined
        where the path passes close to them.
    reach : float, optional
        Right edge ``Re w`` of a continuous spectrum, used the same way.
    """
    if not 0 < theta0 < np.pi:
        raise ConfigurationError(f"theta0 must lie in (0, pi), got {theta0}")
    if rule not in ("gauss", "trapezoid"):
        raise ConfigurationError(f"unknown quadrature rule {rule!r}")
    if n_nodes < PANEL or n_nodes % PANEL:
        raise ConfigurationError(f"n_nodes must be a positive multiple of {PANEL}")
    if sign not in (1, -1) or not (c0 > 0 and b > 0 and beta > 0 and u_max > 0):
        raise ConfigurationError("invalid contour shape parameters")
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(PANEL)
        edges = _panel_edges(n_nodes // PANEL, u_max, theta0, c0, b, beta, points, reach)
        half = 0.5 * np.diff(edges)
        u = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * x).ravel()
        wu = (half[:, None] * w).ravel()
        segment = {"kind": "hyperbola-image", "rule": rule, "u": [-u_max, u_max],
                   "panels": len(half), "points_per_panel": PANEL, "panel_edges": edges.tolist()}
    else:
        h = 2 * u_max / n_nodes
        u = (np.arange(n_nodes) - (n_nodes - 1) / 2) * h
        wu = np.full(n_nodes, h)
        segment = {"kind": "hyperbola-image", "rule": rule, "u": [-u_max, u_max], "step": h}
    wz, dw = _path(u, theta0, c0, b, beta)
    nodes = sign * wz * wz
    weights = sign * 2 * wz * dw * wu
    segments = [segment]
    return Contour(nodes, weights, float(theta0), float(c0), float(b), float(beta),
                   float(u_max), sign, segments)


def _u_max(beta, scale, quad_tol):
    # tail of int |z|^-2 |dz| beyond |z| ~ (beta e^u / 2)^2 is about 2 scale / |z|
    z_end = 2.0 * max(scale, 1.0) / quad_tol
    return float(np.arcsinh(2 * np.sqrt(z_end) / beta))


def _balanced_u_max(n_nodes, theta0, beta, cap, tail=8.0):
    """Truncation point equating the tail ``tail / (beta e^u)^2`` with the
    trapezoidal error ``exp(-pi a n / u)`` for a strip of half-width ``a``."""
    a = np.tan(theta0 / 2)
    u = np.linspace(1.0, max(cap, 1.5), 4000)
    err = np.maximum(tail / (beta * np.exp(u)) ** 2, np.exp(-np.pi * a * n_nodes / u))
    return float(min(u[np.argmin(err)], cap))


def separating_contour(enclosed, excluded, theta0=0.25, sign=1, reach=0.0, n_nodes=256,
                       quad_tol=1e-10, scale=1.0, b=None, beta=None, rule="gauss", tail=8.0):
    """Path with ``enclosed`` points inside and ``excluded`` points outside.

    Parameters
    ----------
    enclosed, excluded : array_like
        Spectral points of ``M1`` and of ``-M2``.
    reach : float
        Extra lower bound for the junction in the ``sqrt(sign z)`` plane (the
        half-line operator fills ``Re sqrt(z) <= |mu|``).
    tail : float
        Constant ``K`` of the truncation error ``K / |z_end|`` balanced against
        the trapezoidal error (trapezoid rule only).
    """
    enclosed = np.atleast_1d(np.asarray(enclosed, dtype=complex))
    excluded = np.atleast_1d(np.asarray(excluded, dtype=complex))
    zl = np.sqrt(sign * enclosed) if enclosed.size else np.zeros(0, complex)
    zr = np.sqrt(sign * excluded)
    a = np.tan(theta0 / 2)

    def window(b):
        def shift(z):
            return z.real - a * (np.sqrt(z.imag ** 2 + b * b) - b)
        lo = max(float(reach), float(shift(zl).max(initial=0.0)))
        hi = float(shift(zr).min(initial=np.inf))
        return lo, hi

    if b is None:
        # the widest bend that keeps most of the best relative gap: wide bends
        # suit spectra near the axis, narrow ones follow sector-shaped spectra
        ymax = max(1.0, float(np.abs(np.concatenate([zl, zr]).imag).max(initial=0.0)))
        cands = 2.0 * ymax * 0.5 ** np.arange(12)
        gaps = []
        for cand in cands:
            lo, hi = window(cand)
            gaps.append((hi - lo) / hi if np.isfinite(hi) and hi > 0 else (1.0 if np.isinf(hi) else -1.0))
        gaps = np.array(gaps)
        ok = np.flatnonzero(gaps >= 0.5 * gaps.max()) if gaps.max() > 0 else [np.argmax(gaps)]
        b = float(cands[ok[0]])
    lo, hi = window(b)
    if not hi > lo:
        raise SpectralViolationError(
            f"no separating path: enclosed spectrum reaches {lo:.4g}, excluded starts at {hi:.4g}")
    if np.isinf(hi):
        hi = lo + 2.0
    c0 = 0.5 * (lo + hi)
    pts = np.concatenate([zl, zr])
    if beta is None:
        beta = max(1.0, float(np.abs(pts.imag).max(initial=0.0)))
    u_max = _u_max(beta, scale, quad_tol)
    if rule == "trapezoid":
        u_max = _balanced_u_max(n_nodes, theta0, beta, u_max, tail)
    return make_contour(theta0, c0, b, beta, u_max, n_nodes, sign,
                        pts, reach if reach > 0 else None, rule)


def build_contour(params, consts, table, n_nodes=256, theta0=None, n_eigs=24):
    """Separating path for ``L1`` (shift ``mu``) and ``A`` on the sector of angle ``omega``.

    Raises
    ------
    SpectralViolationError
        If ``omega mu >= tau`` or an eigenvalue of ``A`` is not separated from
        the spectrum of ``L1``.
    """
    theta0 = consts.theta0 if theta0 is None else theta0
    if not consts.theta_l1 < theta0 < np.pi - consts.theta_l2:
        raise ConfigurationError(
            f"theta0 = {theta0} outside ({consts.theta_l1}, {np.pi - consts.theta_l2})")
    if not check_condition(params.omega, params.mu, table):
        raise SpectralViolationError(
            f"omega mu = {params.omega * params.mu:.4f} is not below tau = {tau_of(table):.4f}")
    lam = operator_eigenvalues(params.omega, n_eigs)
    return separating_contour([], lam, theta0, 1, abs(params.mu), n_nodes,
                              params.tolerances.quad_tol, rule="trapezoid", tail=GRAPH_TAIL)


def apply_a(f, grid=None):
    """Forward operator ``A`` on an XFunction flagged in its domain."""
    grid = f.grid if grid is None else grid
    if not f.in_domain:
        raise PreconditionError("apply_a needs an XFunction flagged in the domain of A")
    p1, p2 = _apply_a_arrays(f.psi1, f.psi2, grid)
    return XFunction(p1, p2, grid)


def _partial_sum(F, nodes, weights, mu, eps0, newton_tol):
    acc1 = np.zeros_like(F.psi1)
    acc2 = np.zeros_like(F.psi2)
    for z, w in zip(nodes, weights):
        G = resolve_a(z, F, eps0=eps0, newton_tol=newton_tol, bc_tol=None)
        H = resolve_l1(z, G, mu, residual_tol=np.inf)
        acc1 += w * H.psi1
        acc2 += w * H.psi2
    return acc1, acc2


def invert_sum(F, contour, params, consts, info=None, workers=1):
    """``V = (L1 - A)^{-1} F`` for a Field ``F``.

    The nodes are split into fixed chunks whose partial sums are added in
    order, so the result does not depend on ``workers``.  If ``info`` is a
    dict it receives the relative imaginary part of ``V`` (zero in exact
    arithmetic for real ``F``) and the node count.
    """
    mu = params.mu
    tol = params.tolerances
    bad = [z for z in contour.quad_nodes if not l1_admissible(z, mu)]
    if bad:
        raise SpectralViolationError(f"{len(bad)} contour nodes fall in the spectrum of L1")
    chunks = [slice(k, k + CHUNK) for k in range(0, contour.n, CHUNK)]

    def run(sl):
        return _partial_sum(F, contour.quad_nodes[sl], contour.quad_weights[sl], mu,
                            consts.eps0, tol.newton_tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(sl) for sl in chunks]
    acc1 = np.zeros_like(F.psi1)
    acc2 = np.zeros_like(F.psi2)
    for a1, a2 in parts:
        acc1 += a1
        acc2 += a2
    V = F.like(acc1 / (2j * np.pi), acc2 / (2j * np.pi), vanishing=True)
    if info is not None:
        size = np.sqrt(np.sum(np.abs(V.psi1) ** 2) + np.sum(np.abs(V.psi2) ** 2))
        imag = np.sqrt(np.sum(V.psi1.imag ** 2) + np.sum(V.psi2.imag ** 2))
        info["imag_ratio"] = float(imag / size) if size > 0 else 0.0
        info["nodes"] = contour.n
    return V


def matrix_contour(M1, M2, theta0=0.25, n_nodes=2048, quad_tol=1e-12):
    """Path separating ``sigma(M1)`` (enclosed) from ``sigma(-M2)``.

    Tries both orientations of the hyperbola family and returns the first
    admissible one.
    """
    e1 = np.linalg.eigvals(np.asarray(M1))
    e2 = -np.linalg.eigvals(np.asarray(M2))
    scale = max(np.abs(e1).max(), np.abs(e2).max(), 1.0)
    last = None
    for sign in (1, -1):
        try:
            return separating_contour(e1, e2, theta0, sign, 0.0, n_nodes, quad_tol, scale)
        except SpectralViolationError as exc:
            last = exc
    raise last


def matrix_oracle(M1, M2, contour=None):
    """Contour-integral inverse of ``M1 + M2`` for commuting square matrices."""
    M1 = np.asarray(M1, dtype=complex)
    M2 = np.asarray(M2, dtype=complex)
    if M1.shape != M2.shape or M1.shape[0] != M1.shape[1]:
        raise ConfigurationError("M1 and M2 must be square matrices of equal size")
    scale = max(np.abs(M1).max(), np.abs(M2).max(), 1.0)
    if np.abs(M1 @ M2 - M2 @ M1).max() > 1e-10 * scale ** 2:
        raise PreconditionError("M1 and M2 must commute")
    if contour is None:
        contour = matrix_contour(M1, M2)
    e1 = np.linalg.eigvals(M1)
    e2 = -np.linalg.eigvals(M2)
    if not (np.all(contour.encloses(e1)) and not np.any(contour.encloses(e2))):
        raise SpectralViolationError("the contour does not separate sigma(M1) from sigma(-M2)")
    eye = np.eye(M1.shape[0])
    z = contour.quad_nodes[:, None, None]
    inner = np.linalg.solve(-M2[None] - z * eye, np.broadcast_to(eye, (contour.n,) + eye.shape))
    terms = np.linalg.solve(M1[None] - z * eye, inner)
    return np.tensordot(contour.quad_weights, terms, axes=(0, 0)) / (2j * np.pi)
