# config.py
# This file manages constants, defaults, and environment variables.
import os
from typing import List

# --- Runtime Configuration ---
# Worker cap for pairwise sums, grid evaluation and Monte Carlo replicates.
N_JOBS = int(os.getenv("QFE_THREADS", "1"))
LOG_LEVEL = os.getenv("QFE_LOG_LEVEL", "WARNING").upper()

# --- Estimation Defaults ---
DEFAULT_KERNEL = "gaussian"
DEFAULT_MODE = "practical"
DEFAULT_DELTA = 0.5
DEFAULT_RHO = 1.2
DEFAULT_ELL_SCALE = 3.0
DEFAULT_LEVEL = 0.95
DEFAULT_L_MODE = "estimated"
# Estimated L is clamped here so M stays positive.
L_FLOOR = 1e-3
# The constant 12^2 in M = 144 ||K||_2^2 L.
THRESHOLD_FACTOR = 144.0

GRID_MODES: List[str] = ["paper", "practical"]
L_MODES: List[str] = ["given", "estimated"]
FIXED_METHODS: List[str] = ["tn", "tbar", "bickel_ritov"]

# --- Numerical Configuration ---
QUAD_EPSREL = 1e-8
QUAD_EPSABS = 1e-13
QUAD_LIMIT = 200
# Rows per block in the pairwise engine.
ROW_BLOCK = 512
# Draws per counter-based stream; draw i comes from stream i // SAMPLE_CHUNK.
SAMPLE_CHUNK = 4096

# --- Monte Carlo Defaults ---
MIN_KS_POINTS = 20
DEFAULT_REPLICATES = 200

# --- Report Configuration ---
REPORT_FORMATS: List[str] = ["csv", "json", "pdf"]
CSV_COLUMNS: List[str] = ["n", "mean_error", "sd_error", "rmse", "coverage", "mean_h", "ks"]

# --- CLI Exit Codes ---
EXIT_OK = 0
EXIT_FATAL = 1
EXIT_BAD_INPUT = 2
EXIT_GRID_INFEASIBLE = 3
EXIT_SAMPLE_TOO_SMALL = 4
