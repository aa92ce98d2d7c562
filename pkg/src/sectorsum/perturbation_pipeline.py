"""Full solve of ``(L1 - A) V + k rho^2 (P1 + P2) V = F`` and the sector-coordinate plumbing.

The perturbation terms are

    P1 V = -exp(-2t) (0, psi1'' + psi1 + psi2),
    P2 V = (0, 2 exp(-2t) (dV1/dt - mu V1)),

and the equation is solved by the fixed point
``V^{m+1} = (L1 - A)^{-1} (F - k rho^2 (P1 + P2) V^m)``, which sums the
Neumann series of ``[I + k rho^2 (P1 + P2)(L1 - A)^{-1}]^{-1}``.

A sector load ``f(x, y)`` on ``{0 < r < rho, 0 < theta < omega}`` enters as
``F = (0, rho^3 exp((mu - 3) t) f(rho e^{-t} cos theta, rho e^{-t} sin theta))``
and the plate deflection is recovered from ``u = r exp(-mu t) V1(t)`` with
``t = ln(rho / r)``.  With these substitutions the abstract equation is
exactly ``Delta^2 u - k Delta u = f``.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .core_grids import Field, field_norm
from .exceptions import DivergenceError, IngestionError, PreconditionError
from .resolvent_t import apply_l1
from .resolvent_theta import apply_a
from .sum_inverter import build_contour, invert_sum

__all__ = [
    "apply_p1", "apply_p2", "apply_perturbation", "forward", "solve",
    "estimate_rho0", "contraction_factor", "residual", "build_rhs",
    "reconstruct_u", "u_evaluator", "edge_traces", "SectorSamples", "SolveReport",
]


def apply_p1(V, grid=None):
    """``P1 V = (0, -exp(-2t) (psi1'' + psi1 + psi2))``, theta derivatives on ``grid``."""
    grid = V.theta_grid if grid is None else grid
    decay = np.exp(-2 * V.tgrid.nodes)[:, None]
    second = -decay * (grid.derivative(V.psi1, 2) + V.psi1 + V.psi2)
    return V.like(np.zeros_like(V.psi1), second)


def apply_p2(V, mu):
    """``P2 V = (0, 2 exp(-2t) (dV1/dt - mu V1))``."""
    decay = np.exp(-2 * V.tgrid.nodes)[:, None]
    dt = V.tgrid.derivative(V.psi1, 1, axis=0)
    return V.like(np.zeros_like(V.psi1), 2 * decay * (dt - mu * V.psi1))


def apply_perturbation(V, params):
    """``k rho^2 (P1 + P2) V``."""
    c = params.k * params.rho ** 2
    return (apply_p1(V) + apply_p2(V, params.mu)) * c


def forward(V, params):
    """``(L1 - A) V + k rho^2 (P1 + P2) V`` by the forward operators only."""
    L = apply_l1(V, params.mu)
    a1, a2 = apply_a(V.psi1, V.psi2, V.theta_grid)
    return V.like(L.psi1 - a1, L.psi2 - a2) + apply_perturbation(V, params)


def residual(V, F, params):
    """Relative residual ``||forward(V) - F|| / ||F||`` in the discrete E-norm.

    Uses the forward operators only, independent of every resolvent code path.
    """
    p = params.p
    num = field_norm(forward(V, params) - F, p)
    den = field_norm(F, p)
    if den == 0:
        return 0.0 if num == 0 else np.inf
    return float(num / den)


@dataclass
class SolveReport:
    """Diagnostics of one fixed-point solve."""

    iterations: int
    corrections: list
    converged: bool
    ratio: float

    def to_dict(self):
        return {"iterations": self.iterations, "corrections": list(self.corrections),
                "converged": self.converged, "observed_ratio": self.ratio}


def solve(F, params, consts, table, contour=None, n_nodes=256, max_iter=60, report=None,
          workers=1):
    """Solve the perturbed equation by fixed-point iteration.

    Parameters
    ----------
    F : Field
        Right-hand side with a clamped first slot.
    params : Params
    consts : SpectralConstants
    table : RootTable
    contour : Contour, optional
        Built by ``build_contour`` with ``n_nodes`` nodes when omitted.
    max_iter : int
    report : dict, optional
        Receives a ``SolveReport`` under the key ``"solve"``.
    workers : int
        Threads for the contour sum; results do not depend on it.

    Returns
    -------
    Field

    Raises
    ------
    SpectralViolationError
        If the spectral gate fails.
    DivergenceError
        If the correction norms fail to decrease over three consecutive steps
        or ``max_iter`` is exhausted.
    """
    if contour is None:
        contour = build_contour(params, consts, table, n_nodes=n_nodes)
    p = params.p
    tol = params.tolerances.neumann_tol
    V = invert_sum(F, contour, params, consts, workers=workers)
    scale = None
    corrections = []
    rising = 0
    for it in range(1, max_iter + 1):
        if params.k == 0:
            new = V
        else:
            new = invert_sum(F - apply_perturbation(V, params), contour, params, consts,
                             workers=workers)
        corr = field_norm(new - V, p)
        if scale is None:
            scale = field_norm(new, p)
        corrections.append(float(corr))
        V = new
        if corr <= tol * scale:
            break
        if len(corrections) >= 2 and corrections[-1] >= corrections[-2]:
            rising += 1
            if rising >= 3:
                raise DivergenceError(
                    f"correction norms {corrections[-4:]} did not decrease; rho is "
                    "likely beyond the contraction radius")
        else:
            rising = 0
    else:
        raise DivergenceError(f"no convergence in {max_iter} iterations "
                              f"(last correction {corrections[-1]:.3g})")
    if report is not None:
        pos = [c for c in corrections if c > 0]
        ratio = float(np.exp(np.mean(np.diff(np.log(pos))))) if len(pos) > 1 else 0.0
        report["solve"] = SolveReport(len(corrections), corrections, True, ratio)
    V.vanishing = True
    return V


def contraction_factor(params, consts, table, probe, contour=None, power_steps=4, workers=1):
    """Gain ``||(P1 + P2)(L1 - A)^{-1} W|| / ||W||`` without the ``k rho^2`` prefactor.

    ``power_steps`` extra power iterations move ``W`` from ``probe`` towards
    the dominant direction.
    """
    if contour is None:
        contour = build_contour(params, consts, table)
    p = params.p
    W = probe
    gain = 0.0
    for _ in range(power_steps + 1):
        size = field_norm(W, p)
        if size == 0:
            raise PreconditionError("the probe must be nonzero")
        V = invert_sum(W, contour, params, consts, workers=workers)
        image = apply_p1(V) + apply_p2(V, params.mu)
        gain = field_norm(image, p) / size
        W = image * (1 / field_norm(image, p)) if gain > 0 else image
    return float(gain)


def estimate_rho0(params, consts, table, probe, contour=None, power_steps=4,
                  target=0.9, info=None, workers=1):
    """Largest radius with empirical contraction ``c(rho) = k rho^2 g < target``.

    ``g`` is the gain from ``contraction_factor``.  The inverse does not
    depend on ``rho``, so ``c`` is evaluated for every bisection step from
    the one measured gain.  The gain of the probe itself can underestimate
    the dominant one by a large factor, so ``power_steps`` power iterations
    refine it by default.  Returns ``inf`` for ``k = 0``.
    """
    if params.k == 0:
        return np.inf
    gain = contraction_factor(params, consts, table, probe, contour, power_steps, workers)
    if info is not None:
        info["gain"] = gain
    if gain == 0:
        return np.inf

    def c(rho):
        return params.k * rho ** 2 * gain

    lo, hi = 0.0, 1.0
    while c(hi) < target:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if c(mid) < target:
            lo = mid
        else:
            hi = mid
    if info is not None:
        info["contraction"] = c(lo)
    return lo


def _evaluate(f, x, y):
    with np.errstate(all="ignore"):
        try:
            out = np.asarray(f(x, y), dtype=complex)
            if out.shape != x.shape:
                out = np.broadcast_to(out, x.shape).copy()
        except (TypeError, ValueError):
            try:
                out = np.vectorize(lambda a, b: complex(f(a, b)))(x, y)
            except Exception as exc:
                raise IngestionError(f"load function failed: {exc}") from exc
        except Exception as exc:
            raise IngestionError(f"load function failed: {exc}") from exc
    bad = ~np.isfinite(out)
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise IngestionError(f"load is not finite at x = {x[j, i]:.6g}, y = {y[j, i]:.6g}")
    return out


def build_rhs(f, params, tgrid, theta_grid, coords="cartesian"):
    """Right-hand side ``(0, rho^3 exp((mu - 3) t) f)`` sampled on the product grid.

    Parameters
    ----------
    f : callable
        ``f(x, y)`` for ``coords="cartesian"`` or ``f(r, theta)`` for
        ``coords="polar"``; vectorized callables are used directly.
    """
    t, th = np.meshgrid(tgrid.nodes, theta_grid.nodes, indexing="ij")
    r = params.rho * np.exp(-t)
    if coords == "cartesian":
        G = _evaluate(f, r * np.cos(th), r * np.sin(th))
    elif coords == "polar":
        G = _evaluate(f, r, th)
    else:
        raise IngestionError(f"unknown coordinate system {coords!r}")
    second = params.rho ** 3 * np.exp((params.mu - 3) * t) * G
    return Field(np.zeros_like(second), second, tgrid, theta_grid)


def u_evaluator(V, params, theta_order=0):
    """Callable ``u(r, theta)`` from ``u = r exp(-mu t) V1(t)(theta)``, ``t = ln(rho / r)``.

    Tensor-product not-a-knot cubic splines in theta and in t on the graded
    nodes, so the edge traces are those of the computed ``V1``.  With
    ``theta_order > 0`` the callable returns that theta-derivative of ``u``.
    Points with ``r <= rho exp(-t_max)`` give NaN.
    """
    tn = V.tgrid.nodes
    spline_th = CubicSpline(V.theta_grid.nodes, V.psi1.real, axis=1).derivative(theta_order) \
        if theta_order else CubicSpline(V.theta_grid.nodes, V.psi1.real, axis=1)
    r_min = params.rho * np.exp(-tn[-1])

    def u(r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, dtype=float),
                                       np.asarray(theta, dtype=float))
        out = np.full(r.shape, np.nan)
        ok = (r > r_min) & (r <= params.rho * (1 + 1e-14))
        if not ok.any():
            return out
        t = np.log(params.rho / r[ok])
        ang = theta[ok]
        vals = np.empty(len(t))
        for start in range(0, len(t), 512):
            sl = slice(start, start + 512)
            angles, inv = np.unique(ang[sl], return_inverse=True)
            cols = CubicSpline(tn, spline_th(angles), axis=0)(np.clip(t[sl], 0.0, tn[-1]))
            vals[sl] = cols[np.arange(len(inv)), inv]
        out[ok] = r[ok] * np.exp(-params.mu * t) * vals
        return out

    return u


def _num(v):
    return repr(float(v))


@dataclass
class SectorSamples:
    """Deflection samples on a polar grid; ``mask`` marks the unresolved core."""

    r: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    mask: np.ndarray
    r_min: float

    @property
    def x(self):
        return self.r[:, None] * np.cos(self.theta)[None, :]

    @property
    def y(self):
        return self.r[:, None] * np.sin(self.theta)[None, :]

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "x", "y", "u", "masked"])
            x, y = self.x, self.y
            for j, rr in enumerate(self.r):
                for i, th in enumerate(self.theta):
                    w.writerow([_num(rr), _num(th), _num(x[j, i]), _num(y[j, i]),
                                _num(self.u[j, i].real), int(self.mask[j, i])])


def reconstruct_u(V, params, r=None, theta=None, n_r=64):
    """Sample the deflection ``u`` on a polar grid of the sector.

    Radii at or below ``rho exp(-t_max)`` lie outside the resolved annulus;
    they are masked and set to NaN.  The default radii are ``n_r`` uniform
    radii in ``(0, rho]``.
    """
    if theta is None:
        theta = V.theta_grid.nodes
    if r is None:
        r = np.linspace(params.rho / n_r, params.rho, n_r)
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    R, TH = np.meshgrid(r, theta, indexing="ij")
    u = u_evaluator(V, params)(R, TH)
    r_min = params.rho * np.exp(-V.tgrid.t_max)
    return SectorSamples(r, theta, u, np.isnan(u), r_min)


def edge_traces(V, params):
    """Clamped-edge and arc traces of the deflection, relative to ``max |u|``.

    On the straight edges ``u = r exp(-mu t) psi1`` and
    ``du/dn = (1/r) du/dtheta = exp(-mu t) psi1'``; both are read from the
    samples and the grid derivative of ``psi1`` at every t node.  The arc
    ``r = rho`` is ``t = 0``, where ``V(0)`` must vanish.
    """
    g = V.theta_grid
    t = V.tgrid.nodes
    r = params.rho * np.exp(-t)
    damp = np.exp(-params.mu * t)
    u = r[:, None] * damp[:, None] * V.psi1.real
    d1 = g.derivative_matrix(1)
    slope = damp[:, None] * (V.psi1.real @ d1[[0, -1]].T)
    scale = np.abs(u).max()
    if scale == 0:
        scale = 1.0
    return {
        "u_edge": float(np.abs(u[:, [0, -1]]).max() / scale),
        "dudn_edge": float(np.abs(slope).max() / scale),
        "u_arc": float(np.abs(u[0]).max() / scale),
        "V0_norm": float(V.endpoint_norms(params.p)[0]),
        "u_max": float(np.abs(u).max()),
    }
