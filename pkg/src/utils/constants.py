# Application constants

APP_NAME = "localno"
APP_VERSION = "0.4.0"
CLI_NAME = "localno-cli"

# On-disk format versions
GRID_FORMAT_VERSION = 1
KERNEL_FORMAT_VERSION = 1
DATASET_FORMAT_VERSION = 2
CHECKPOINT_FORMAT_VERSION = 1
GENERATOR_VERSION = "darcy-v1"

# Fixed output filenames under --out
METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.bin"
CONFIG_FILE = "config.json"
DATASET_FILE = "dataset.bin"
VERIFY_FILE_TEMPLATE = "verify_{suite}.csv"
EVAL_FILE = "eval.csv"

# Environment
THREADS_ENV_VAR = "LOCALNO_THREADS"

# Neighbour search switches from brute force to tree/band pruning above this
BRUTE_FORCE_LIMIT = 4096

# Assembled DISCO kernels kept per model, most recently used first
KERNEL_CACHE_SIZE = 8

# Kernel bases
DEFAULT_PLANAR_CUTOFF = 0.007
DEFAULT_SPHERE_CUTOFF = 0.1  # in units of pi
DEFAULT_TORUS_CUTOFF = 0.05  # in units of pi, for a 2*pi periodic box
DEFAULT_MODEL_CUTOFF = 2.0 / 64  # two spacings of a 64-point unit grid
DEFAULT_RINGS = 1
DEFAULT_AZIMUTH = 4

# Differential layer
DEFAULT_STENCIL_SIZE = 3
PADDING_MODES = ["reflective", "periodic", "zero", "replicate"]

# Darcy data
DARCY_MODES = 20
TEST_SEED_OFFSET = 1_000_000

# Optimizer
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Gradient checks
FD_STEP = 1e-5
FD_MAX_ENTRIES = 24

# Tolerances
SPHERE_AREA_RTOL = 1e-12
EXACT_TOL = 1e-12
SPECTRAL_TOL = 1e-10
STENCIL_TOL = 1e-10
GRADCHECK_TOL = 1e-5

# Data tasks
TASKS = ["darcy", "parabola", "bandlimited"]

# Verification suites
VERIFY_SUITES = [
    "diff-convergence",
    "collapse",
    "disco-equivalence",
    "equivariance",
    "gradcheck",
    "irregular-stencil",
    "resolution",
]
