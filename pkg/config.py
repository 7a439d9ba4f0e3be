"""
Veritest Configuration Settings
"""
import logging
import os

# Application Settings
APP_NAME = "Veritest Mechanism Toolkit"
VERSION = "1.0.0"

# ── Algebra tolerances ─────────────────────────────────────────────────────────

ALGEBRA_TOL = 1e-12        # measure sums, CDF comparisons, row equality
DEGENERATE_COEF = 1e-12    # λ-constraint coefficients below this are ties
WITNESS_TOL = 1e-10        # score conversions must reproduce π_{ψ|θ} this closely
LP_TOL = 1e-9              # feasibility tolerance for the nonbinary path
PROFILE_TOL = 1e-10        # social choice comparisons and deviation gains

# ── Numerical integration ──────────────────────────────────────────────────────

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 2000
QUAD_ACCEPT_ERR = 1e-8      # error estimate still accepted when quad reports roundoff
KERNEL_TABLE_POINTS = 4001

# Finite differences for λ± when no analytic derivative is supplied
FD_STEP = 1e-6
NEGATIVE_PRECISION_TOL = 1e-8

# Root finding for θ* and inverse marginal cost
ROOT_XTOL = 1e-10

# ── Grids ──────────────────────────────────────────────────────────────────────

DEFAULT_GRID_N = 201
MIN_GRID_N = 51
VIRTUAL_VALUE_GRID_N = 101
BOUNDS_GRID_N = 101
MONOTONE_TOL = 1e-9
BOUND_TOL = 1e-8            # lower-bound diagnostic
DENSITY_CHECK_RTOL = 1e-4   # F' against f on the validation grid
PRECISION_SCALES = [0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0]
IC_TOL = 1e-6
BINDING_TOL = 1e-9
MAX_BINDING_REPORTED = 10
REFINE_STEP = 1e-7
WIN_COUNT_MAX_POINTS = 51   # per-agent grid cap when counting wins for 3+ agents

# ── Presets ────────────────────────────────────────────────────────────────────

DISTRIBUTION_PRESETS = ["uniform", "truncated_exponential", "tabulated", "point"]
ALPHA_PRESETS = ["exponential", "power", "tabulated"]
COST_PRESETS = ["quadratic", "power"]
DEFAULT_LAMBDAS = [0.0, 1.0, 2.0, 3.0]

# ── Artifacts ──────────────────────────────────────────────────────────────────

CSV_PRECISION = 17
MECHANISM_COLUMNS = ["theta", "q", "t", "U", "phi", "phi_myerson"]
JSON_INDENT = 2

# Exit codes for the command line
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT_ERROR = 2

# ── Logging ────────────────────────────────────────────────────────────────────

LOG_ENV_VAR = "VERITEST_LOG"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
DEFAULT_LOG_LEVEL = "WARNING"


def get_log_level():
    """Read the verbosity from VERITEST_LOG (level name or number)."""
    raw = os.environ.get(LOG_ENV_VAR, DEFAULT_LOG_LEVEL).strip()
    if raw.isdigit():
        return int(raw)
    level = logging.getLevelName(raw.upper())
    return level if isinstance(level, int) else logging.WARNING


def setup_logging(level=None):
    """Configure the root logger once for command-line and web entry points."""
    root = logging.getLogger()
    if level is None:
        level = get_log_level()
    if not root.handlers:
        logging.basicConfig(level=level, format=LOG_FORMAT)
    root.setLevel(level)


# Web Portal settings
WEB_HOST = '127.0.0.1'
WEB_PORT = 8888
