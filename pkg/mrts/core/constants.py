"""
Constants for the MRTS spin-dynamics simulator.
All magic numbers, unit factors and default grids are centralized here.
"""

import math

# === HILBERT SPACE LAYOUT ===
RADICAL_DIM = 2
COUPLER_DIM = 3
SINGLET_BLOCK_DIM = RADICAL_DIM * RADICAL_DIM  # 4
TRIPLET_BLOCK_DIM = SINGLET_BLOCK_DIM * COUPLER_DIM  # 12
HILBERT_DIM = 2 * SINGLET_BLOCK_DIM + TRIPLET_BLOCK_DIM  # 20
LIOUVILLE_DIM = HILBERT_DIM * HILBERT_DIM  # 400

MANIFOLD_S0 = "S0"
MANIFOLD_S1 = "S1"
MANIFOLD_T1 = "T1"
MANIFOLDS = (MANIFOLD_S0, MANIFOLD_S1, MANIFOLD_T1)

SLOT_RADICAL1 = "radical1"
SLOT_RADICAL2 = "radical2"
SLOT_COUPLER = "coupler"
SLOTS = (SLOT_RADICAL1, SLOT_RADICAL2, SLOT_COUPLER)

# === JUMP CHANNELS ===
CHANNEL_RADICAL = 1
CHANNEL_TRIPLET = 2
CHANNEL_ISC = 3
CHANNEL_TRIPLET_DECAY = 4
CHANNEL_FLUORESCENCE = 5

EXPECTED_JUMP_COUNTS = {
    "radical1": 3,
    "radical2": 3,
    "triplet": 8,
    "isc": 7,
    "triplet_decay": 7,
    "fluorescence": 4,
}

# === PHYSICAL CONSTANTS (internal energy unit: rad/ns, i.e. E / hbar) ===
# CODATA values divided by hbar, 6 significant digits.
MU_B_OVER_HBAR = 0.0879410  # rad ns^-1 mT^-1
KB_OVER_HBAR = 130.920  # rad ns^-1 K^-1
HARTREE_OVER_HBAR = 4.13414e7  # rad ns^-1 per Hartree
EV_OVER_HBAR = 1.51927e6  # rad ns^-1 per eV
CM1_OVER_HBAR = 188.365  # rad ns^-1 per cm^-1 (2 pi c)
MHZ_OVER_HBAR = 2.0 * math.pi * 1.0e-3  # rad ns^-1 per MHz
GHZ_OVER_HBAR = 2.0 * math.pi  # rad ns^-1 per GHz

# Couplings quoted "in mT" are energies g_e * mu_B * (1 mT) with the free-electron g.
MT_EQUIVALENT_G = 2.00232
FREE_ELECTRON_G = 2.00232

# === NUMERICAL TOLERANCES ===
SPIN_ALGEBRA_TOL = 1e-14
COUPLED_STATE_TOL = 1e-12
TRACE_DRIFT_TOL = 1e-9
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = 1e-8
RESOLVENT_CONDITION_LIMIT = 1e14
PROPAGATOR_CACHE_DIGITS = 12

# === DEFAULT GRIDS ===
DEFAULT_N_THETA = 50
DEFAULT_N_PHI = 100
DEFAULT_N_OMEGA = 100
DEFAULT_OMEGA_MIN = 40.0  # rad/ns
DEFAULT_OMEGA_MAX = 85.0  # rad/ns
DEFAULT_T_END = 10.0  # ns
DEFAULT_N_TIME_POINTS = 201
DEFAULT_SNAPSHOT_TIME = 0.0062  # ns (6.2 ps)
DEFAULT_PEAK_PROMINENCE = 1e-3  # relative to the series range
RESOLVENT_SOLVERS = ("lu", "schur")

# === EXCHANGE EXTRACTION ===
ENERGY_LABELS = ("a", "b", "c", "d", "triplet", "broken_symmetry")
J3_NEGLIGIBLE_RATIO = 1e-3
AFM = "AFM"
FM = "FM"
ZERO_COUPLING = "none"

# === CONFIG ===
CONFIG_SCHEMA_VERSION = 1
ARTIFACT_VERSION = "0.1.0"
ENV_WORKERS = "MRTS_WORKERS"
ENV_LOG_LEVEL = "MRTS_LOG_LEVEL"
WORKER_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
)

# === OUTPUT ===
OUTPUT_DELIMITER = ","
PROVENANCE_PREFIX = "# "
FLOAT_FORMAT = "%.12e"
TRAJECTORY_FILE = "trajectory.csv"
TOMOGRAPHY_FILE_TEMPLATE = "tomography_t{time:.6f}ns.csv"
SPECTRUM_FILE_SINGLE = "spectrum_single.csv"
SPECTRUM_FILE_POWDER = "spectrum_powder.csv"
TIMINGS_FILE_POWDER = "spectrum_powder_timings.csv"
SCAN_FILE_TEMPLATE = "scan_j1_{index:02d}.csv"
SCAN_SUMMARY_FILE = "scan_j1_combined.csv"
EXCHANGE_FILE = "exchange_couplings.csv"

# === EXIT CODES ===
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3
EXIT_EXCHANGE_ERROR = 4

# === ERROR MESSAGES ===
ERROR_NEGATIVE_SPIN = "Spin quantum number must be non-negative"
ERROR_NON_HALF_INTEGER_SPIN = "Spin quantum number must be a multiple of 1/2"
ERROR_COUPLER_OUTSIDE_T1 = "Coupler slot exists only in the T1 manifold"
ERROR_TIMES_NOT_INCREASING = "Time grid must be strictly increasing"
ERROR_OMEGAS_NOT_INCREASING = "Frequency grid must be strictly increasing and non-empty"
ERROR_EMPTY_SCAN = "J1 scan list must not be empty"
