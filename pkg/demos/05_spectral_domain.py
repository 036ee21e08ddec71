"""Stability parameters and the floor eta_E of the spectral domain.

Run: python3 demos/05_spectral_domain.py
"""

from __future__ import annotations

import numpy as np

from fourfold_rmt import GammaEvaluator, band, r_matrix, spectral_domain, wigner

for prof in (wigner(256), band(256, 16)):
    ev = GammaEvaluator(prof, r_matrix(prof, "real-gaussian"))
    print(f"\n{prof.kind} N={prof.n} M={prof.M:.1f}")
    print("   E    Gamma(E+0.01i)  Gamma(E+1i)")
    for E in (-3.0, -2.0, -1.0, 0.0, 2.0):
        print(f"{E:5.1f}   {ev(complex(E, 0.01)).gamma:10.3f}   {ev(complex(E, 1.0)).gamma:10.3f}")
    dom = spectral_domain(0.1, prof, "real-gaussian", E_grid=np.linspace(-4, 4, 9))
    print("eta_E at gamma=0.1:", " ".join(f"{E:+.0f}:{e:.4f}" for E, e in zip(dom.E_grid, dom.eta_E)))
    print(f"{len(dom.points)} admitted grid points")
