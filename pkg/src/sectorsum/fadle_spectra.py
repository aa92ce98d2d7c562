"""Fädle roots, the spectral threshold tau, and spectral-region membership tests.

Roots of ``sinh z = -s kappa z`` are located by argument-principle winding
counts over a box decomposition, then polished by Newton iteration.  With
``kappa = 1`` these are the Fädle roots.  With ``kappa = sin(omega)/omega`` the
same equations give the exact eigenvalues of the angular operator, since the
resolvent denominators are

    U1 = exp(-omega s) (2 sinh(omega s) - 2 s sin(omega)),
    U2 = exp(-omega s) (2 sinh(omega s) + 2 s sin(omega)),     s = sqrt(-lambda).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import ConfigurationError, DomainError, RegionTooSmallError

__all__ = [
    "RootTable", "SpectralConstants", "find_roots", "tau_of", "eigenvalues_of_minus_l2",
    "operator_eigenvalues", "check_condition", "in_pi_mu", "in_sigma_l1",
    "separation_report", "spectral_constants", "default_eps0",
]

TAU_REFERENCE = 4.21239


@dataclass(frozen=True)
class RootTable:
    """Fädle roots with ``Re z > 0`` and ``Im z > 0``, sorted by modulus.

    ``branch_tags[j]`` is ``"+"`` when ``z_j`` solves ``sinh z + z = 0`` and
    ``"-"`` when it solves ``sinh z - z = 0``.
    """

    roots: np.ndarray
    branch_tags: tuple
    residuals: np.ndarray = field(default=None)
    winding_total: int = -1
    region: tuple = ()

    @property
    def tau(self):
        return tau_of(self)

    def to_records(self):
        return [{"re": z.real, "im": z.imag, "branch": b, "residual": float(r)}
                for z, b, r in zip(self.roots, self.branch_tags, self.residuals)]


@dataclass(frozen=True)
class SpectralConstants:
    """Angles and the resolvent disk radius used to place the contour."""

    eps_l1: float = 0.1
    eps_l2: float = 0.3
    eps0: float = 1.0

    def __post_init__(self):
        if not (self.eps_l1 > 0 and self.eps_l2 > 0 and self.eps0 > 0):
            raise ConfigurationError("spectral constants must be positive")
        if not self.theta_l1 + self.theta_l2 < np.pi:
            raise ConfigurationError(
                f"theta_l1 + theta_l2 = {self.theta_l1 + self.theta_l2:.4f} must be below pi "
                f"(need eps_l2 > 2 eps_l1)")

    @property
    def theta_l1(self):
        return 2.0 * self.eps_l1

    @property
    def theta_l2(self):
        return np.pi - self.eps_l2

    @property
    def theta0(self):
        return 0.5 * (self.theta_l1 + np.pi - self.theta_l2)

    def to_dict(self):
        return {"eps_l1": self.eps_l1, "eps_l2": self.eps_l2, "eps0": self.eps0,
                "theta_l1": self.theta_l1, "theta_l2": self.theta_l2, "theta0": self.theta0}


def _newton(z, sign, kappa, tol, maxiter=60):
    """Newton iteration for ``sinh z + sign kappa z = 0``."""
    for _ in range(maxiter):
        f = np.sinh(z) + sign * kappa * z
        df = np.cosh(z) + sign * kappa
        if df == 0:
            return z, False
        step = f / df
        z = z - step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z, abs(np.sinh(z) + sign * kappa * z) < tol * max(1.0, abs(np.sinh(z)))


def _winding(sign, kappa, x0, x1, y0, y1):
    """Number of zeros of ``sinh z + sign kappa z`` inside a box (argument principle)."""
    m = 64
    while True:
        t = np.linspace(0.0, 1.0, m, endpoint=False)
        path = np.concatenate([x0 + (x1 - x0) * t + 1j * y0,
                               x1 + 1j * (y0 + (y1 - y0) * t),
                               x1 - (x1 - x0) * t + 1j * y1,
                               x0 + 1j * (y1 - (y1 - y0) * t)])
        f = np.sinh(path) + sign * kappa * path
        dphase = np.angle(np.roll(f, -1) / f)
        if np.abs(dphase).max() < np.pi / 4 or m >= 1 << 14:
            return int(round(dphase.sum() / (2 * np.pi)))
        m *= 2


def _roots_in_box(sign, kappa, box, tol, depth=0):
    x0, x1, y0, y1 = box
    count = _winding(sign, kappa, x0, x1, y0, y1)
    if count <= 0:
        return [], max(count, 0)
    found = []
    for sx in np.linspace(x0, x1, 5)[1:-1]:
        for sy in np.linspace(y0, y1, 5)[1:-1]:
            z, ok = _newton(complex(sx, sy), sign, kappa, tol)
            if ok and x0 <= z.real < x1 and y0 <= z.imag < y1:
                if all(abs(z - w) > 1e-8 * max(1.0, abs(z)) for w in found):
                    found.append(z)
    if len(found) >= count or depth >= 6:
        return found[:count], count
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    found, total = [], 0
    for sub in [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]:
        r, c = _roots_in_box(sign, kappa, sub, tol, depth + 1)
        found += r
        total += c
    return found, total


def _scan(kappa, x_lo, x_hi, y_lo, y_hi, tol, cell=1.9371):
    """All zeros of both factors ``sinh z +/- kappa z`` in a rectangle."""
    xs = np.append(np.arange(x_lo, x_hi, cell), x_hi)
    ys = np.append(np.arange(y_lo, y_hi, cell), y_hi)
    roots, tags, total = [], [], 0
    for sign, tag in ((1, "+"), (-1, "-")):
        for i in range(len(xs) - 1):
            for j in range(len(ys) - 1):
                r, c = _roots_in_box(sign, kappa, (xs[i], xs[i + 1], ys[j], ys[j + 1]), tol)
                roots += r
                tags += [tag] * len(r)
                total += c
    return roots, tags, total


def find_roots(count, newton_tol=1e-12, x_max=8.0, y_max=24.0, max_grow=6):
    """The ``count`` smallest-modulus roots of ``(sinh z + z)(sinh z - z) = 0``.

    Only the representative with ``Re z > 0`` and ``Im z > 0`` of each
    conjugate/sign orbit is kept; ``z = 0`` is excluded.
    """
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    x_lo = y_lo = 0.25
    for _ in range(max_grow):
        roots, tags, total = _scan(1.0, x_lo, x_max, y_lo, y_max, newton_tol)
        roots = np.array(roots, dtype=complex)
        order = np.argsort(np.abs(roots))
        roots, tags = roots[order], [tags[i] for i in order]
        radius = min(x_max, y_max)
        if len(roots) >= count and abs(roots[count - 1]) <= radius and total == len(roots):
            roots, tags = roots[:count], tags[:count]
            res = np.array([abs(np.sinh(z) + (1 if t == "+" else -1) * z)
                            for z, t in zip(roots, tags)])
            return RootTable(roots, tuple(tags), res, total, (x_lo, x_max, y_lo, y_max))
        x_max *= 1.5
        y_max *= 1.5
    raise RegionTooSmallError(f"found {len(roots)} roots, {count} requested; enlarge the region")


def tau_of(table):
    """Minimum of ``|Im z_j|`` over the stored roots."""
    if len(table.roots) == 0:
        raise ConfigurationError("empty root table")
    return float(np.min(np.abs(np.imag(table.roots))))


def eigenvalues_of_minus_l2(table, omega):
    """The values ``-z_j^2 / omega^2``, dropping any that fall on [0, +inf)."""
    if not 0 < omega <= 2 * np.pi:
        raise ConfigurationError(f"omega must lie in (0, 2pi], got {omega}")
    lam = -np.asarray(table.roots) ** 2 / omega ** 2
    on_axis = (np.abs(lam.imag) <= 1e-14 * np.abs(lam)) & (lam.real >= 0)
    return lam[~on_axis]


def _degenerate_one_is_eigenvalue(omega):
    # at lambda = 1 two characteristic roots merge; the clamped determinant is
    # 8 sin(omega) (sin(omega) - omega cos(omega))
    return abs(np.sin(omega) * (np.sin(omega) - omega * np.cos(omega))) < 1e-10


@lru_cache(maxsize=64)
def _operator_eigenvalues(omega, count):
    kappa = np.sin(omega) / omega
    y_max = 12.0
    while True:
        roots, tags, _ = _scan(kappa, -0.3, 2.0 + np.log1p(y_max), 0.3, y_max, 1e-12)
        lam = []
        for tag in ("+", "-"):
            branch = []
            for w, t in zip(roots, tags):
                if t != tag or abs(w - 1j * omega) < 1e-8:
                    continue
                value = -w * w / omega ** 2
                for cand in (value, np.conj(value)):
                    if all(abs(cand - x) > 1e-8 * max(1.0, abs(x)) for x in branch):
                        branch.append(cand)
            lam += branch
        if _degenerate_one_is_eigenvalue(omega) and all(abs(x - 1) > 1e-8 for x in lam):
            lam.append(1.0 + 0j)
        lam = np.array(lam, dtype=complex)
        key = np.sqrt(lam).real
        lam = lam[np.lexsort((lam.imag, key))]
        if len(lam) >= count and np.sqrt(lam[count - 1]).real * omega < y_max - 2.0:
            return tuple(lam[:count])
        y_max *= 1.6


def operator_eigenvalues(omega, count=12):
    """Exact eigenvalues of the clamped angular operator ``A`` on ``(0, omega)``.

    They are ``-w^2/omega^2`` for the nonzero roots of
    ``sinh w = +/- (sin(omega)/omega) w`` (the zeros of U1 and U2), with the
    merged-root value ``lambda = 1`` handled separately.  Sorted by
    ``Re sqrt(lambda)``, conjugates both listed.
    """
    if not 0 < omega <= 2 * np.pi:
        raise ConfigurationError(f"omega must lie in (0, 2pi], got {omega}")
    return np.array(_operator_eigenvalues(float(omega), int(count)))


def default_eps0(omega):
    """Half the modulus of the eigenvalue of ``A`` nearest to 0."""
    lam = operator_eigenvalues(omega, 12)
    return 0.5 * float(np.min(np.abs(lam)))


def spectral_constants(omega, eps_l1=0.1, eps_l2=0.3, eps0=None):
    return SpectralConstants(eps_l1, eps_l2, default_eps0(omega) if eps0 is None else eps0)


def check_condition(omega, mu, table):
    """The spectral gate ``omega mu < tau`` (always true for ``mu <= 0``)."""
    if mu <= 0:
        return True
    return bool(omega * mu < tau_of(table))


def in_pi_mu(z, mu):
    """Whether ``Re sqrt(z) > mu``, via the parabola ``y^2 + 4 mu^2 x - 4 mu^4 = 0``."""
    z = complex(z)
    if z.imag == 0 and z.real < 0:
        raise DomainError(f"z = {z} lies on the branch cut")
    if mu <= 0:
        return True
    x, y = z.real, z.imag
    return bool(x > mu * mu or y * y + 4 * mu * mu * x - 4 * mu ** 4 > 0)


def in_sigma_l1(lam, mu, consts):
    """Membership in the sector where the t-resolvent bound holds."""
    lam = complex(lam)
    eps = consts.eps_l1
    if lam == 0 or abs(np.angle(lam)) > np.pi - 2 * eps:
        return False
    if abs(lam) < 4 * mu * mu / np.sin(eps) ** 2:
        return False
    return in_pi_mu(lam, mu)


def separation_report(params, table, consts, n_operator=12):
    """Margins between the eigenvalues of ``A`` and the spectrum of ``L1``.

    ``fadle`` lists ``Re sqrt(lambda_j) - max(mu, 0)`` for ``lambda_j = -z_j^2/omega^2``;
    ``operator`` lists ``Re sqrt(lambda) - |mu|`` for the exact eigenvalues of ``A``.
    A pair is separated when its minimum margin is positive.
    """
    lam_f = eigenvalues_of_minus_l2(table, params.omega)
    d_f = np.sqrt(lam_f).real - max(params.mu, 0.0)
    lam_o = operator_eigenvalues(params.omega, n_operator)
    d_o = np.sqrt(lam_o).real - abs(params.mu)
    return {
        "omega": params.omega, "mu": params.mu, "tau": tau_of(table),
        "gate": check_condition(params.omega, params.mu, table),
        "fadle_lambda": lam_f, "fadle_margin": d_f, "min_fadle_margin": float(d_f.min()),
        "operator_lambda": lam_o, "operator_margin": d_o,
        "min_operator_margin": float(d_o.min()),
        "separated_fadle": bool(d_f.min() > 0), "separated_operator": bool(d_o.min() > 0),
        "eps0": consts.eps0,
    }
