"""Averages of fluctuations are much smaller than the fluctuations.

F_k X = X - E_k X, with E_k the expectation over rows k and -k at fixed minor,
estimated by conditional resampling.

Run: python3 demos/04_fluctuation_averaging.py
"""

from __future__ import annotations

from fourfold_rmt.harness import ExperimentConfig, ZCell, fluctuation_averaging_experiment

cfg = ExperimentConfig(ladder=[128], z_cells=[ZCell(1.0, eta_exponent=0.5)], trials=5, seed=0, resamples=300)
cell = fluctuation_averaging_experiment(cfg, weights="uniform")["cells"][0]
med = cell["median"]
print(f"N = {cell['N']}, z = {cell['E']} + {cell['eta']:.4f}i, {cell['trials']} trials, {cell['resamples']} resamples")
print("\n statistic        median max_k   median |mean_k|   ratio")
for name in ("F_inv", "F_diag", "F_counter", "direct_diag", "direct_counter"):
    print(f" {name:15s}  {med['max_' + name]:.3e}      {med['avg_' + name]:.3e}         {cell['gain_' + name]:.3f}")
print(f"\nPsi proxy {cell['psi_proxy']:.3e}, Psi^2 proxy {cell['psi2_proxy']:.3e}, Gamma_S {cell['gamma_s']:.3f}")
