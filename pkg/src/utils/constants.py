from enum import Enum
from typing import Literal


class IntensityLabel(str, Enum):
    """Labels for the three source intensities {mu, nu, omega}."""

    MU = "mu"
    NU = "nu"
    OMEGA = "omega"


# Declared Literals
OUTCOME = Literal["L", "R", "N"]
TRIAL_MODE = Literal["code", "test"]

# Simulation parameters of a typical TF-QKD implementation
DEFAULT_DARK_COUNT = 1e-8
DEFAULT_DET_EFF = 0.2
DEFAULT_MISALIGN = 0.015
DEFAULT_RECONCILIATION_F = 1.1
DEFAULT_OMEGA = 0.0
DEFAULT_M_LIST = [4, 6, 8, 10, 12]
DEFAULT_LOSS_SCAN = {"start": 0.0, "end": 60.0, "step": 1.0}

# Photon statistics
SERIES_REL_TOL = 1e-18
SERIES_MAX_TERMS = 10_000
NORMALIZATION_TOL = 1e-12

# Linear programming
LP_FEASIBILITY_TOL = 1e-8
LP_SOLVER_TOL = 1e-10
LP_BOUND_SLACK = 1e-10
LP_MAX_ITER = 10_000

# Intensity search
DEFAULT_MU_RANGE = (1e-4, 1.0)
DEFAULT_NU_RANGE = (1e-4, 1.0)
DEFAULT_GRID_SIZE = 10
DEFAULT_REFINE_ROUNDS = 3
DEFAULT_SHRINK = 4.0

# Monte Carlo
MC_SHARD_SIZE = 1 << 18
DEFAULT_MC_TRIALS = 1_000_000
MC_Z_WARN = 4.0
TRIAL_LOG_FIELDS = ("mode", "x", "y", "k_a", "k_b", "xi_a", "xi_b", "outcome", "kept", "error")

# Result table
RESULT_COLUMNS = ["m", "loss_db", "mu", "nu", "q_mu", "e_mu", "i_ae", "rate", "plob"]
MC_COLUMNS = ["m", "loss_db", "field", "analytic", "mc", "stderr", "z"]
FLOAT_FORMAT = "%.17g"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3

# Environment variable holding the default scan worker count (.env supported)
WORKERS_ENV_VAR = "RATE_SCAN_WORKERS"
