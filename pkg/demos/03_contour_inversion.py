"""
Inverting an operator sum by a contour integral
===============================================

For commuting sectorial ``M1`` and ``M2`` the inverse of ``M1 + M2`` is
``(1 / 2 pi i) int (M1 - z)^{-1} (-M2 - z)^{-1} dz`` over a path separating
the two spectra.  The same quadrature, with the matrices replaced by the
t-operator and the angular operator, inverts ``L1 - A``.
"""

import numpy as np

from sectorsum.core_grids import Field, Params, field_norm, make_t_grid, make_theta_grid
from sectorsum.fadle_spectra import find_roots, spectral_constants
from sectorsum.perturbation_pipeline import forward
from sectorsum.sum_inverter import build_contour, invert_sum, matrix_oracle

M1 = np.array([[2.0, 1.0], [0.0, 2.0]])
M2 = np.array([[3.0, 0.5], [0.0, 3.0]])
print("matrix pair error:", np.abs(matrix_oracle(M1, M2) - np.linalg.inv(M1 + M2)).max())

# manufactured field: V* is clamped in theta and vanishes at t = 0
omega = np.pi / 2
P = Params(omega=omega, mu=2.0, k=0.0)
tg, th = make_t_grid(20.0, 64), make_theta_grid(omega, 64)
T, TH = np.meshgrid(tg.nodes, th.nodes, indexing="ij")
b = TH ** 2 * (omega - TH) ** 2
V = Field(T ** 2 * np.exp(-T) * b, T ** 2 * np.exp(-1.5 * T) * b * np.cos(TH), tg, th)

table = find_roots(10)
consts = spectral_constants(omega)
for n in (32, 64, 128):
    contour = build_contour(P, consts, table, n_nodes=n)
    U = invert_sum(forward(V, P), contour, P, consts)
    print(f"{n:4d} nodes: relative error {field_norm(U - V) / field_norm(V):.2e}")
