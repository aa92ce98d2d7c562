"""
Numerical checks of the analytic estimates
==========================================

The suprema of a Fourier multiplier, two convexity inequalities, and the
resolvent bounds of both operators, evaluated on random data.
"""

import numpy as np

from sectorsum.analysis_checks import (bound_scan_a, half_line_ratio, kato_convexity_check,
                                       mihlin_scan)

for r in (0.5, 1.0, 2.0):
    rep = {}
    sup_m, sup_d = mihlin_scan(r, report=rep)
    print(f"r = {r}: sup|m| = {sup_m:.5f} (|r|/2 = {r / 2:.5f}), "
          f"closed-form sup|xi m'| = {sup_d:.5f} (3|r|/32 = {3 * r / 32:.5f}), "
          f"exact sup|xi m'| = {rep['sup_xim_exact']:.5f}")

print(f"\nt exp(-t): ratio {half_line_ratio([0.0, 1.0], 1.0):.4f}")
rep = kato_convexity_check(samples=100)
print(f"100 samples: half line {rep['max_ratio_half_line']:.3f}, "
      f"interval {rep['max_ratio_interval']:.3f}")

rep = bound_scan_a([-10.0, -100.0], trials=10, omega=np.pi / 2)
print(f"\nangular resolvent bounds: {len(rep['violations'])} violations, "
      f"decay slope {rep['decay_slope']:.3f}")
for name, ratio in sorted(rep["worst_ratio"].items()):
    print(f"  {name:18s} worst lhs/rhs {ratio:.3f}")
