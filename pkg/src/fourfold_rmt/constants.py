"""Central table of numerical tolerances and defaults."""

# linalg_core
INVERSE_RESIDUAL_PER_DIM = 1e-10
HERMITIAN_TOL = 1e-12
EIGEN_BACKWARD_REL = 1e-9

# ensembles
FOURFOLD_TOL = 1e-12
ROW_SUM_TOL = 1e-12

# semicircle
FIXED_POINT_TOL = 1e-12
M_ESTIMATE_MIN_C = 0.01

# resolvent / selfconsistent
WARD_RESIDUAL_PER_DIM = 1e-10
IDENTITY_BASE_TOL = 1e-9
DEFAULT_MC_RESAMPLES = 2000

# control_params
POINTS_PER_DECADE = 32
ETA_MAX = 10.0
E_MAX = 10.0

# locallaw_harness
DEFAULT_FA_RESAMPLES = 500
SEED_ENV_VAR = "FOURFOLD_RMT_SEED"


def identity_tolerance(eta: float) -> float:
    """Residual tolerance for the exact resolvent identities at spectral height ``eta``."""
    return IDENTITY_BASE_TOL * max(1.0, 1.0 / eta**2)
