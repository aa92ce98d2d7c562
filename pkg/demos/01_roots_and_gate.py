"""
Roots of sinh z = +-z and the spectral gate
===========================================

The complex roots of ``sinh z + z = 0`` and ``sinh z - z = 0`` set the
threshold ``tau`` (the smallest imaginary part).  A solve on a sector of
angle ``omega`` with shift ``mu`` is admitted when ``omega mu < tau``.
"""

import numpy as np

from sectorsum.core_grids import Params
from sectorsum.fadle_spectra import (check_condition, find_roots, operator_eigenvalues,
                                     separation_report, spectral_constants)

table = find_roots(6)
for j, (z, tag) in enumerate(zip(table.roots, table.branch_tags), 1):
    print(f"z_{j} = {z.real:.10f} + {z.imag:.10f}i   branch {tag}")
print(f"tau = {table.tau:.8f}")

# the gate for a few sectors with the default shift mu = 3 - 2/p = 2
for omega in (np.pi / 4, np.pi / 2, np.pi):
    ok = check_condition(omega, 2.0, table)
    print(f"omega = {omega:.4f}: omega mu = {2 * omega:.4f} -> {'OK' if ok else 'FAIL'}")

# the eigenvalues of the clamped angular operator are the zeros of the
# boundary determinants; the separation report compares both lists with
# the spectrum of the t-operator
omega = np.pi / 2
print("\nlowest eigenvalues of A on (0, pi/2):")
for lam in operator_eigenvalues(omega, 4):
    print(f"  {lam.real:12.5f} {lam.imag:+12.5f}i")
rep = separation_report(Params(omega=omega, mu=2.0), table, spectral_constants(omega))
print(f"min margin Re sqrt(lambda) - |mu| = {rep['min_operator_margin']:.4f}")
