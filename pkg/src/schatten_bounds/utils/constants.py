# Package Constants
PACKAGE_LOGGER_NAME = "schatten_bounds"
DISTRIBUTION_NAME = "schatten-bounds"
REPORT_SCHEMA_VERSION = 1

# Numerical Configuration
# Checkpoints are stored in 32-bit floats, so composed matrices are only
# low-rank up to f32 round-off. The default rank tolerance is
# max(rows, cols) * F32_EPSILON relative to the top singular value.
F32_EPSILON = 1.2e-7

# Default Bound Configuration Values
DEFAULT_SAMPLE_SIZE = 10_000
DEFAULT_TOKEN_LENGTH = 512
DEFAULT_HIDDEN_DIM = 768
DEFAULT_DEPTH = 12
DEFAULT_DELTA = 0.01
DEFAULT_LOSS_LIPSCHITZ = 1.0
DEFAULT_LOSS_BOUND = 1.0
DEFAULT_READOUT_RADIUS = 1.0
DEFAULT_INPUT_ROW_BOUND = 1.0
DEFAULT_UNIV_CONST = 1.0

# Activations
RELU_LIPSCHITZ = 1.0
GELU_LIPSCHITZ = 1.13
ALLOWED_ACTIVATIONS = ["relu", "gelu"]
DEFAULT_ACTIVATION = "gelu"

# BERT Layout
DEFAULT_HEAD_DIM = 64
DEFAULT_FFN_RATIO = 4
DEFAULT_TENSOR_PREFIX = "encoder.layer"

# Post hoc Selection
# Floor constant c0 in ||W||_2 >= exp(-c0 (L + log N)); checked, never enforced.
DEFAULT_FLOOR_CONSTANT = 1.0

# Verification Suites
ALLOWED_SUITES = ["norms", "lipschitz", "allocation", "posthoc", "parser"]
DEFAULT_TRIALS = 100
DEFAULT_SEED = 0

# Execution
DEFAULT_WORKERS = 4

# CLI Exit Codes
EXIT_OK = 0
EXIT_PROPERTY_VIOLATION = 1
EXIT_INPUT_ERROR = 2
EXIT_USAGE = 64

# Logging Configuration
# Change this to DEBUG, WARNING, ERROR as needed
DEFAULT_LOG_LEVEL = "INFO"
