"""The half-line resolvent ``(L1 - lambda)^{-1}`` with ``L1 V = V'' - 2 mu V' + mu^2 V``.

With ``q = sqrt(lambda)`` (principal branch) the solution of
``(L1 - lambda) V = R`` with ``V(0) = 0`` and ``V`` decaying at infinity is

    V(t) = exp(t (mu - q)) / (2 q) int_0^inf exp(-s (mu + q)) R(s) ds
           - 1/(2 q) [ int_0^t exp(-(t - s)(q - mu)) R(s) ds
                       + int_t^inf exp(-(s - t)(q + mu)) R(s) ds ].

It exists for ``Re q > |mu|``.  The first integral is the right convolution
evaluated at ``t = 0``, so every term is one product-integration matrix.
"""

import warnings

import numpy as np

from .core_grids import Field
from .exceptions import BoundaryWarning, DomainError, TruncationWarning
from .fadle_spectra import in_pi_mu

__all__ = ["resolve_l1", "apply_l1", "l1_admissible"]


def l1_admissible(lam, mu):
    """Whether ``lambda`` lies in the resolvent set of ``L1``: ``Re sqrt(lambda) > |mu|``."""
    lam = complex(lam)
    if lam.imag == 0 and lam.real <= 0:
        return False
    return bool(in_pi_mu(lam, mu) and np.sqrt(lam).real > abs(mu))


def resolve_l1(lam, R, mu, residual_tol=1e-6):
    """``(L1 - lambda)^{-1} R`` for a Field ``R`` (t on axis 0).

    Raises
    ------
    DomainError
        If ``Re sqrt(lambda) <= |mu|``.

    Warns
    -----
    TruncationWarning
        If ``exp(-t_max (Re sqrt(lambda) - |mu|))`` is not below ``residual_tol``.
    """
    lam = complex(lam)
    if not l1_admissible(lam, mu):
        raise DomainError(f"lambda = {lam} needs Re sqrt(lambda) > |mu| = {abs(mu)}")
    q = np.sqrt(lam)
    grid = R.tgrid
    rate = q.real - abs(mu)
    if np.exp(-grid.t_max * rate) >= residual_tol:
        warnings.warn(f"tail exp(-t_max * {rate:.3g}) exceeds residual_tol at lambda = {lam}",
                      TruncationWarning, stacklevel=2)
    left, _ = grid.convolution_matrices(q - mu)
    _, right = grid.convolution_matrices(q + mu)
    layer = np.exp(grid.nodes * (mu - q))[:, None] * right[0][None, :]
    op = (layer - left - right) / (2 * q)
    psi1 = op @ R.psi1
    psi2 = op @ R.psi2
    return R.like(psi1, psi2, vanishing=True)


def apply_l1(V, mu, residual_tol=None):
    """Forward operator ``V'' - 2 mu V' + mu^2 V`` along t.

    If ``residual_tol`` is given, a BoundaryWarning is issued when the
    endpoint X-norms of ``V`` are not below it.
    """
    g = V.tgrid
    out = []
    for a in (V.psi1, V.psi2):
        out.append(g.derivative(a, 2, axis=0) - 2 * mu * g.derivative(a, 1, axis=0) + mu * mu * a)
    if residual_tol is not None:
        n0, n1 = V.endpoint_norms()
        if max(n0, n1) >= residual_tol:
            warnings.warn(f"V does not vanish at the ends: |V(0)| = {n0:.3g}, "
                          f"|V(t_max)| = {n1:.3g}", BoundaryWarning, stacklevel=2)
    return V.like(out[0], out[1])
