import json
from pathlib import Path

DOMAIN = "open_oven"
VERSION = json.loads(
    (Path(__file__).parent / "manifest.json").read_text(encoding="utf-8")
)["version"]

C0 = 2.99792458e8
EPS0 = 8.8541878128e-12
MU0 = 1.25663706212e-6
ETA0 = MU0 * C0
R_GAS = 8.314462618
T_REF = 293.15

DEFAULT_COURANT = 0.95
MAX_COURANT = 0.99
DEFAULT_CELLS_PER_WAVELENGTH = 15
DEFAULT_CELL_BUDGET = 4_000_000
GRID_SNAP_TOL = 1e-6
BLOWUP_LIMIT = 1e30

DEFAULT_CONVERGENCE_TOL = 0.005
DEFAULT_MAX_PERIODS = 2000
RAMP_PERIODS = 50
WINDOW_PERIODS = 10

ROOT_SCAN_STEP_HZ = 1e6
ROOT_RTOL = 1e-12

DEFAULT_H_CONV = 10.0
DEFAULT_DT_COUPLE = 1.0
DEFAULT_RESOLVE_THRESHOLD = 0.02
DEFAULT_SNAPSHOT_INTERVAL = 5.0
DEFAULT_U_MAX = 25.0
MAX_DALPHA_PER_SUBSTEP = 0.01

THREADS_ENV = "OPEN_OVEN_THREADS"
DEFAULT_MAX_CONCURRENT_SOLVES = 2
