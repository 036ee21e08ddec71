"""A fourfold-symmetric Wigner matrix, its spectrum and its Stieltjes transform.

Run: python3 demos/01_semicircle_and_spectrum.py
"""

from __future__ import annotations

import numpy as np

from fourfold_rmt import hermitian_eigenvalues, m_semicircle, rho, sample_fourfold, wigner
from fourfold_rmt.ensembles import orbit_representatives, validate_fourfold
from fourfold_rmt.linalg_core import invert_shifted

n = 1024
smp = sample_fourfold(wigner(n), "real-gaussian", seed=1)
h = smp.h
print(f"N = {n}, fourfold violations: {len(validate_fourfold(h))}")
table = orbit_representatives(n)
print(f"independent orbits: {len(table)}, real parameters: {int(np.sum(2 - table.forced_real))} = N(N+1)/2 = {n * (n + 1) // 2}")

# the flip x -> -x maps H to its transpose, so the spectrum is flip invariant
lam = hermitian_eigenvalues(h)
print(f"spectrum in [{lam[0]:.3f}, {lam[-1]:.3f}] (semicircle support [-2, 2])")

counts, edges = np.histogram(lam, bins=16, range=(-2.2, 2.2), density=True)
mid = (edges[:-1] + edges[1:]) / 2
print("\n     E   histogram   rho(E)")
for e, c in zip(mid, counts):
    print(f"{e:6.2f}   {c:9.4f}   {rho(e):6.4f}")

# m_N(z) = N^-1 tr G(z) against m(z) down to small eta
print("\n        z          |m_N - m|     1/(N eta)")
for eta in (1.0, 0.1, 0.01, 0.003):
    z = complex(0.5, eta)
    mn = np.trace(invert_shifted(h, z)) / n
    label = f"0.5+{eta:g}i"
    print(f"  {label:12s}     {abs(mn - m_semicircle(z)):.3e}     {1 / (n * eta):.3e}")
