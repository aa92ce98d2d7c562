"""Grids, discrete derivatives, discrete norms and the exponential-kernel convolution.

Every grid carries a local interpolation structure: on each interval
``[x_k, x_{k+1}]`` the samples are represented by the degree-7 polynomial
through the eight nearest nodes.  Integrating that polynomial gives the
quadrature weights; integrating it against ``exp(-alpha |x - s|)`` gives the
product-integration convolution.  Both are therefore exact for polynomials of
degree seven, on any node distribution.
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import ConfigurationError, DomainError, PreconditionError, TruncationError

__all__ = [
    "Tolerances", "Params", "Grid", "ThetaGrid", "TGrid", "XFunction", "Field",
    "make_theta_grid", "make_t_grid", "derivative", "lp_norm", "x_norm",
    "field_norm", "kernel_convolution", "one_sided_convolutions",
    "fornberg_weights", "save_xfunction_csv", "load_xfunction_csv",
    "save_field_csv", "load_field_csv",
]

STENCIL = 8          # interpolation width used by quadrature and convolution
_MOMENT_SWITCH = 40.0  # |alpha h| above which the moment recurrence is stable
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every solver stage."""

    quad_tol: float = 1e-10
    newton_tol: float = 1e-12
    neumann_tol: float = 1e-8
    residual_tol: float = 1e-6

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"tolerance {name} must be positive, got {value}")


@dataclass(frozen=True)
class Params:
    """Physical and analytic parameters of one solve.

    Parameters
    ----------
    omega : float
        Opening angle of the sector, in (0, 2 pi].
    mu : float, optional
        Shift of the t-operator.  Defaults to ``nu = 3 - 2/p``.
    p : float
        Lebesgue exponent, > 1.
    k : float
        Coefficient of the lower-order Laplacian term, >= 0.  ``k = 0`` switches
        the perturbation off.
    rho : float
        Sector radius, > 0.
    tolerances : Tolerances
    """

    omega: float = np.pi / 2
    mu: float | None = None
    p: float = 2.0
    k: float = 1.0
    rho: float = 1.0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if not 0 < self.omega <= 2 * np.pi:
            raise ConfigurationError(f"omega must lie in (0, 2pi], got {self.omega}")
        if not self.p > 1:
            raise ConfigurationError(f"p must exceed 1, got {self.p}")
        if not self.k >= 0:
            raise ConfigurationError(f"k must be non-negative, got {self.k}")
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        if isinstance(self.tolerances, dict):
            object.__setattr__(self, "tolerances", Tolerances(**self.tolerances))
        if self.mu is None:
            object.__setattr__(self, "mu", self.nu)

    @property
    def nu(self):
        return 3.0 - 2.0 / self.p

    def to_dict(self):
        return {"omega": self.omega, "mu": self.mu, "p": self.p, "k": self.k,
                "rho": self.rho, "tolerances": asdict(self.tolerances)}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        tol = data.pop("tolerances", {}) or {}
        known = {"omega", "mu", "p", "k", "rho"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(tolerances=Tolerances(**tol), **data)


def fornberg_weights(x0, x, order):
    """Finite-difference weights for derivatives 0..order at ``x0``.

    Returns an array of shape ``(order + 1, len(x))`` (Fornberg's recursion).
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((order + 1, n))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[kk, i] = c1 * (kk * c[kk - 1, i - 1] - c5 * c[kk, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for kk in range(mn, 0, -1):
                c[kk, j] = (c4 * c[kk, j] - kk * c[kk - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _moments(a):
    """Exponential moments on the unit interval for every entry of ``a``.

    Returns ``(mu, nu)`` of shape ``(len(a), STENCIL)`` with
    ``mu[:, m] = int_0^1 exp(-(1 - v) a) v^m dv`` and
    ``nu[:, m] = int_0^1 exp(-v a) v^m dv``.
    """
    a = np.asarray(a, dtype=complex)
    mu = np.empty((a.size, STENCIL), dtype=complex)
    nu = np.empty_like(mu)
    powers = _GL_X[:, None] ** np.arange(STENCIL)
    small = np.abs(a) <= _MOMENT_SWITCH
    if small.any():
        s = a[small][:, None]
        mu[small] = (np.exp(-(1.0 - _GL_X) * s) * _GL_W) @ powers
        nu[small] = (np.exp(-_GL_X * s) * _GL_W) @ powers
    big = ~small
    if big.any():
        s = a[big]
        e = np.exp(-s)
        m_prev = (1.0 - e) / s
        n_prev = m_prev.copy()
        mu[big, 0] = m_prev
        nu[big, 0] = n_prev
        for m in range(1, STENCIL):
            m_prev = (1.0 - m * m_prev) / s
            n_prev = (m * n_prev - e) / s
            mu[big, m] = m_prev
            nu[big, m] = n_prev
    return mu, nu


class Grid:
    """Strictly increasing nodes with positive quadrature weights."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < STENCIL:
            raise ConfigurationError(f"a grid needs at least {STENCIL} nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("grid nodes must be strictly increasing")
        self.nodes = nodes
        self.n = len(nodes)

    # local interpolation on each interval
    @cached_property
    def _local(self):
        x, n = self.nodes, self.n
        k = np.arange(n - 1)
        starts = np.clip(k - STENCIL // 2 + 1, 0, n - STENCIL)
        h = np.diff(x)
        coeff = np.empty((n - 1, STENCIL, STENCIL))
        powers = np.arange(STENCIL)
        for i in k:
            v = (x[starts[i]:starts[i] + STENCIL] - x[i]) / h[i]
            coeff[i] = np.linalg.inv(v[:, None] ** powers)
        return starts, h, coeff

    @cached_property
    def weights(self):
        starts, h, coeff = self._local
        w = np.zeros(self.n)
        piece = h[:, None] * np.einsum("kmj,m->kj", coeff, 1.0 / (np.arange(STENCIL) + 1))
        for i in range(self.n - 1):
            w[starts[i]:starts[i] + STENCIL] += piece[i]
        return w

    def integrate(self, values, axis=-1):
        values = np.moveaxis(np.asarray(values), axis, -1)
        return values @ self.weights

    def derivative_matrix(self, order):
        if order < 0 or order > 4:
            raise ConfigurationError(f"derivative order must be in 0..4, got {order}")
        if self.n < order + 4:
            raise ConfigurationError(
                f"order-{order} derivative needs at least {order + 4} nodes, grid has {self.n}")
        cache = self.__dict__.setdefault("_dmats", {})
        if order not in cache:
            m = order + 6 + (order % 2 == 0)
            m = min(self.n, m)
            d = np.zeros((self.n, self.n))
            for i in range(self.n):
                s = int(np.clip(i - m // 2, 0, self.n - m))
                d[i, s:s + m] = fornberg_weights(self.nodes[i], self.nodes[s:s + m], order)[order]
            if order > 0:
                # rows annihilate constants exactly
                d[np.arange(self.n), np.arange(self.n)] -= d.sum(axis=1)
            cache[order] = d
        return cache[order]

    def derivative(self, values, order=1, axis=-1):
        values = np.moveaxis(np.asarray(values), axis, 0)
        out = np.tensordot(self.derivative_matrix(order), values, axes=(1, 0))
        return np.moveaxis(out, 0, axis)

    def convolution_matrices(self, alpha):
        """Matrices of the left and right exponential convolutions.

        ``left @ f`` approximates ``int_{x_0}^{x_i} exp(-(x_i - s) alpha) f(s) ds`` and
        ``right @ f`` approximates ``int_{x_i}^{x_end} exp(-(s - x_i) alpha) f(s) ds``.
        """
        alpha = complex(alpha)
        if not alpha.real > 0:
            raise DomainError(f"convolution needs Re(alpha) > 0, got {alpha}")
        x, n = self.nodes, self.n
        starts, h, coeff = self._local
        mu, nu = _moments(alpha * h)
        wl = h[:, None] * np.einsum("km,kmj->kj", mu, coeff)
        wr = h[:, None] * np.einsum("km,kmj->kj", nu, coeff)
        pl = np.zeros((n - 1, n), dtype=complex)
        pr = np.zeros((n - 1, n), dtype=complex)
        for i in range(n - 1):
            pl[i, starts[i]:starts[i] + STENCIL] = wl[i]
            pr[i, starts[i]:starts[i] + STENCIL] = wr[i]
        gap_l = x[:, None] - x[None, 1:]      # x_i - x_{k+1}
        gap_r = x[None, :-1] - x[:, None]     # x_k - x_i
        el = np.where(gap_l >= 0, np.exp(-alpha * np.maximum(gap_l, 0.0)), 0.0)
        er = np.where(gap_r >= 0, np.exp(-alpha * np.maximum(gap_r, 0.0)), 0.0)
        return el @ pl, er @ pr

    def to_dict(self):
        return {"kind": type(self).__name__, "n": self.n, "nodes": self.nodes.tolist()}


class ThetaGrid(Grid):
    """Discretization of the angular interval ``(0, omega)``."""

    def __init__(self, nodes, omega, clustering=0.0):
        super().__init__(nodes)
        self.omega = float(omega)
        self.clustering = float(clustering)

    def to_dict(self):
        return dict(super().to_dict(), omega=self.omega, clustering=self.clustering)


class TGrid(Grid):
    """Discretization of the truncated half-line ``(0, t_max)``."""

    def __init__(self, nodes, grading):
        super().__init__(nodes)
        self.t_max = float(self.nodes[-1])
        self.grading = dict(grading)

    def to_dict(self):
        return dict(super().to_dict(), t_max=self.t_max, grading=self.grading)


def make_theta_grid(omega, n, clustering=0.5):
    """Angular grid with mild clustering toward both endpoints.

    Nodes are ``omega * (x - c sin(2 pi x) / (2 pi))`` for uniform ``x`` in
    [0, 1].  The spacing at the endpoints is ``(1 - c)`` times the mean spacing,
    which keeps the high-order derivative stencils well conditioned while
    refining the boundary layers of the resolvent kernels.
    """
    if not 0 < omega <= 2 * np.pi:
        raise ConfigurationError(f"omega must lie in (0, 2pi], got {omega}")
    if n < STENCIL:
        raise ConfigurationError(f"theta grid needs n >= {STENCIL}, got {n}")
    if not 0 <= clustering < 1:
        raise ConfigurationError("clustering must lie in [0, 1)")
    x = np.linspace(0.0, 1.0, n)
    nodes = omega * (x - clustering * np.sin(2 * np.pi * x) / (2 * np.pi))
    nodes[0], nodes[-1] = 0.0, omega
    return ThetaGrid(nodes, omega, clustering)


def make_t_grid(t_max, n, grading="exponential", beta=3.0, residual_tol=1e-6):
    """Grid on ``[0, t_max]``, uniform or exponentially graded toward 0.

    The graded nodes are ``t_max (exp(beta x) - 1) / (exp(beta) - 1)``.
    """
    if not t_max > 0:
        raise ConfigurationError(f"t_max must be positive, got {t_max}")
    if n < STENCIL:
        raise ConfigurationError(f"t grid needs n >= {STENCIL}, got {n}")
    if np.exp(-2.0 * t_max) >= residual_tol:
        raise TruncationError(
            f"exp(-2 t_max) = {np.exp(-2.0 * t_max):.3g} is not below residual_tol = {residual_tol:g}")
    x = np.linspace(0.0, 1.0, n)
    if grading == "uniform":
        nodes = t_max * x
        desc = {"kind": "uniform"}
    elif grading == "exponential":
        nodes = t_max * np.expm1(beta * x) / np.expm1(beta)
        desc = {"kind": "exponential", "beta": float(beta)}
    else:
        raise ConfigurationError(f"unknown grading {grading!r}")
    nodes[-1] = t_max
    return TGrid(nodes, desc)


def derivative(values, grid, order=1, axis=-1):
    """Derivative of the given order (1..4) of samples on ``grid``."""
    if order < 1:
        raise ConfigurationError("derivative order must be at least 1")
    return grid.derivative(values, order, axis=axis)


def lp_norm(values, grid, p=2.0, axis=-1):
    """Discrete L^p norm along ``axis`` using the grid quadrature weights."""
    values = np.abs(np.asarray(values))
    return grid.integrate(values ** p, axis=axis) ** (1.0 / p)


def kernel_convolution(alpha, f, grid, axis=0):
    """Two-sided exponential convolution on ``grid``.

    Computes ``K(x) = int_a^x exp(-(x - s) alpha) f(s) ds + int_x^b exp(-(s - x) alpha) f(s) ds``
    at every node by product integration.
    """
    left, right = one_sided_convolutions(alpha, f, grid, axis=axis)
    return left + right


def one_sided_convolutions(alpha, f, grid, axis=0):
    """Left and right parts of :func:`kernel_convolution`, returned separately."""
    kl, kr = grid.convolution_matrices(alpha)
    f = np.moveaxis(np.asarray(f, dtype=complex), axis, 0)
    left = np.tensordot(kl, f, axes=(1, 0))
    right = np.tensordot(kr, f, axes=(1, 0))
    return np.moveaxis(left, 0, axis), np.moveaxis(right, 0, axis)


class XFunction:
    """A pair ``(psi1, psi2)`` of complex samples on a ThetaGrid."""

    def __init__(self, psi1, psi2, grid, in_domain=False):
        self.psi1 = np.asarray(psi1, dtype=complex)
        self.psi2 = np.asarray(psi2, dtype=complex)
        if self.psi1.shape != (grid.n,) or self.psi2.shape != (grid.n,):
            raise ConfigurationError("XFunction samples must match the grid size")
        self.grid = grid
        self.in_domain = in_domain

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.n), np.zeros(grid.n), grid, in_domain=True)

    def boundary_defects(self):
        """The six clamped-domain traces: psi1, psi1' and psi2 at both ends."""
        d1 = self.grid.derivative_matrix(1)
        return np.array([self.psi1[0], self.psi1[-1], d1[0] @ self.psi1,
                         d1[-1] @ self.psi1, self.psi2[0], self.psi2[-1]])

    def check_domain(self, tol):
        defects = np.abs(self.boundary_defects())
        if defects.max() >= tol:
            raise PreconditionError(f"boundary traces {defects} exceed {tol:g}")
        self.in_domain = True
        return self

    def __add__(self, other):
        return XFunction(self.psi1 + other.psi1, self.psi2 + other.psi2, self.grid,
                         self.in_domain and other.in_domain)

    def __sub__(self, other):
        return XFunction(self.psi1 - other.psi1, self.psi2 - other.psi2, self.grid,
                         self.in_domain and other.in_domain)

    def __mul__(self, c):
        return XFunction(c * self.psi1, c * self.psi2, self.grid, self.in_domain)

    __rmul__ = __mul__


def x_norm(f, grid=None, p=2.0):
    """Discrete norm of ``W_0^{2,p} x L^p``.

    ``||psi1|| + ||psi1'|| + ||psi1''|| + ||psi2||``, all in L^p(0, omega).
    """
    grid = f.grid if grid is None else grid
    d1 = grid.derivative(f.psi1, 1)
    d2 = grid.derivative(f.psi1, 2)
    return (lp_norm(f.psi1, grid, p) + lp_norm(d1, grid, p)
            + lp_norm(d2, grid, p) + lp_norm(f.psi2, grid, p))


class Field:
    """An XFunction-valued function of t: arrays of shape ``(n_t, n_theta)``."""

    def __init__(self, psi1, psi2, tgrid, theta_grid, vanishing=False):
        self.psi1 = np.asarray(psi1, dtype=complex)
        self.psi2 = np.asarray(psi2, dtype=complex)
        shape = (tgrid.n, theta_grid.n)
        if self.psi1.shape != shape or self.psi2.shape != shape:
            raise ConfigurationError(f"Field samples must have shape {shape}")
        self.tgrid = tgrid
        self.theta_grid = theta_grid
        self.vanishing = vanishing

    @classmethod
    def zeros(cls, tgrid, theta_grid):
        z = np.zeros((tgrid.n, theta_grid.n))
        return cls(z, z, tgrid, theta_grid, vanishing=True)

    @classmethod
    def from_functions(cls, f1, f2, tgrid, theta_grid):
        """Sample callables ``f(t, theta)`` on the product grid."""
        t, th = np.meshgrid(tgrid.nodes, theta_grid.nodes, indexing="ij")
        return cls(np.broadcast_to(f1(t, th), t.shape), np.broadcast_to(f2(t, th), t.shape),
                   tgrid, theta_grid)

    def at(self, j):
        return XFunction(self.psi1[j], self.psi2[j], self.theta_grid)

    def like(self, psi1, psi2, vanishing=False):
        return Field(psi1, psi2, self.tgrid, self.theta_grid, vanishing)

    def endpoint_norms(self, p=2.0):
        return (x_norm(self.at(0), p=p), x_norm(self.at(self.tgrid.n - 1), p=p))

    def __add__(self, other):
        return self.like(self.psi1 + other.psi1, self.psi2 + other.psi2)

    def __sub__(self, other):
        return self.like(self.psi1 - other.psi1, self.psi2 - other.psi2)

    def __mul__(self, c):
        return self.like(c * self.psi1, c * self.psi2, self.vanishing)

    __rmul__ = __mul__


def field_x_norms(V, p=2.0):
    """X-norm of ``V(t_j)`` for every t node, vectorized over t."""
    g = V.theta_grid
    d1 = g.derivative(V.psi1, 1, axis=1)
    d2 = g.derivative(V.psi1, 2, axis=1)
    return (lp_norm(V.psi1, g, p) + lp_norm(d1, g, p)
            + lp_norm(d2, g, p) + lp_norm(V.psi2, g, p))


def field_norm(V, p=2.0):
    """Discrete norm of ``L^p(0, infinity; X)``: the t-L^p norm of ``x_norm(V(t))``."""
    return lp_norm(field_x_norms(V, p), V.tgrid, p)


# serialization: JSON metadata plus CSV samples

def _num(v):
    return repr(float(v))   # shortest round-trip text


def save_xfunction_csv(path, f):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "psi1_re", "psi1_im", "psi2_re", "psi2_im"])
        for th, a, b in zip(f.grid.nodes, f.psi1, f.psi2):
            w.writerow([_num(th), _num(a.real), _num(a.imag), _num(b.real), _num(b.imag)])


def load_xfunction_csv(path, omega=None):
    """Read an XFunction CSV; the theta column defines the grid."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nodes = data[:, 0]
    grid = ThetaGrid(nodes, nodes[-1] if omega is None else omega)
    return XFunction(data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4], grid)


def save_field_csv(path, V, meta_path=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "psi1_re", "psi1_im", "psi2_re", "psi2_im"])
        for j, t in enumerate(V.tgrid.nodes):
            for i, th in enumerate(V.theta_grid.nodes):
                a, b = V.psi1[j, i], V.psi2[j, i]
                w.writerow([_num(t), _num(th), _num(a.real), _num(a.imag),
                            _num(b.real), _num(b.imag)])
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump({"tgrid": V.tgrid.to_dict(), "theta_grid": V.theta_grid.to_dict()},
                      fh, indent=2)


def load_field_csv(path, omega=None):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = np.unique(data[:, 0])
    th = np.unique(data[:, 1])
    shape = (len(t), len(th))
    tgrid = TGrid(t, {"kind": "file"})
    theta_grid = ThetaGrid(th, th[-1] if omega is None else omega)
    psi1 = (data[:, 2] + 1j * data[:, 3]).reshape(shape)
    psi2 = (data[:, 4] + 1j * data[:, 5]).reshape(shape)
    return Field(psi1, psi2, tgrid, theta_grid)
