"""Numerical toolkit for the local semicircle law of fourfold-symmetric random matrices."""

from fourfold_rmt.linalg_core import (
    hermitian_eigenvalues,
    inf_operator_norm,
    invert_shifted,
    read_matrix_csv,
    write_matrix_csv,
)
from fourfold_rmt.ensembles import (
    EntryDistribution,
    FourfoldMatrix,
    VarianceProfile,
    band,
    fourier_goe_check,
    fourier_transform,
    orbit_representatives,
    sample_flip_model,
    sample_fourfold,
    sample_goe,
    validate_fourfold,
    wigner,
)
from fourfold_rmt.semicircle import density_mass, m_empirical, m_semicircle, rho
from fourfold_rmt.resolvent import GreenFunction, green_minor
from fourfold_rmt.selfconsistent import diag_breakdown, lambda_params, offdiag_breakdown
from fourfold_rmt.control_params import GammaEvaluator, gamma_values, r_matrix, spectral_domain
from fourfold_rmt.harness import (
    ExperimentConfig,
    ExperimentRecord,
    domination_fit,
    fluctuation_averaging_experiment,
    preliminary_bound_experiment,
    run_local_law,
)

__version__ = "0.1.0"

__all__ = [
    "EntryDistribution",
    "ExperimentConfig",
    "ExperimentRecord",
    "GammaEvaluator",
    "density_mass",
    "domination_fit",
    "fluctuation_averaging_experiment",
    "fourier_goe_check",
    "preliminary_bound_experiment",
    "run_local_law",
    "FourfoldMatrix",
    "GreenFunction",
    "VarianceProfile",
    "band",
    "diag_breakdown",
    "fourier_transform",
    "gamma_values",
    "green_minor",
    "hermitian_eigenvalues",
    "inf_operator_norm",
    "invert_shifted",
    "lambda_params",
    "m_empirical",
    "m_semicircle",
    "offdiag_breakdown",
    "orbit_representatives",
    "r_matrix",
    "read_matrix_csv",
    "rho",
    "sample_flip_model",
    "sample_fourfold",
    "sample_goe",
    "spectral_domain",
    "validate_fourfold",
    "wigner",
    "write_matrix_csv",
]
