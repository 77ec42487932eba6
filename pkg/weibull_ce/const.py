"""Constants for weibull-ce."""

import math
from logging import Logger, getLogger

LOGGER: Logger = getLogger(__package__)

# Base package constants
NAME = "weibull-ce"
VERSION = "0.1.0"

# Test plan defaults (22 kV class cable data, one step is ten minutes).
# A 5 kV step over the 22/sqrt(3) kV phase voltage, shown rounded as 0.39.
DEFAULT_DV = 5 * math.sqrt(3) / 22
DEFAULT_VS = 1.0
DEFAULT_K0 = 1e4

# Estimation defaults: initial (beta, n, zeta, v_th) and profile sweep
DEFAULT_INIT = (2.0, 2.0, 1.0, 0.5)
DEFAULT_PROFILE = (0.5, 0.999, 0.001)
GOF_PROFILE = (0.85, 0.999, 0.001)

DEFAULT_NEWTON_TOL = 1e-10
DEFAULT_MAX_ITER = 100
DEFAULT_MIN_DAMPING = 2.0**-30
GUARD_BAND = 1e-12

# Moments
QUADRATURE_START_NODES = 32
QUADRATURE_MAX_NODES = 512
QUADRATURE_RTOL = 1e-10
# below this offset the kernel is evaluated through the incomplete gamma function
QUADRATURE_SWITCH = 25.0
SERIES_SURVIVAL_TOL = 1e-16
SERIES_STAGE_CAP = 1_000_000
SERIES_CHUNK = 256
VARIANCE_SLACK = 1e-12

# Simulation and goodness of fit
GROUP_SURVIVAL_TOL = 1e-14
DEFAULT_REPLICATES = 1000
DEFAULT_SEED = 0
ATTEMPT_FACTOR = 3

# Parameter names, in vector order
PARAM_NAMES = ("beta", "n", "zeta", "v_th")

# Published grid of the mean/SD curves
TABLE1_K_TILDE = (1e3, 1e4, 1e5)
TABLE1_V_TH = (0.0, 0.5, 0.9)
TABLE1_BETA = (2.0, 3.0)
TABLE1_N = (1.0, 2.0, 3.0)

# Exit codes
EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_PARSE_ERROR = 3
EXIT_NOT_CONVERGED = 4
EXIT_CONFIG_ERROR = 5
EXIT_NUMERICAL_ERROR = 6

STARTUP_MESSAGE = f"""
-------------------------------------------------------------------
{NAME}
Version: {VERSION}
Weibull cumulative exposure model for step-stress life test data.
-------------------------------------------------------------------
"""
