# Configuration settings for the relay topology planner

# System Model Settings
DEFAULT_PATHLOSS_EXPONENT = 3.0
DEFAULT_BANDWIDTH_HZ = 125e3
DEFAULT_NOISE_FIGURE_DB = 6.0
DEFAULT_PB_POWER_W = 1.0
DEFAULT_CONVERSION_EFFICIENCY = 0.7
DEFAULT_FRAME_T = 0.1          # seconds
DEFAULT_RADIUS_R = 500.0       # meters
DEFAULT_MIN_DISTANCE = 1.0     # meters
DEFAULT_REFERENCE_DISTANCE = 1000.0  # meters; path loss is (d / d0)^-alpha
THERMAL_NOISE_DBM_PER_HZ = -174.0

# Iterative Balancing Settings
DEFAULT_EPS1 = 1e-6            # bit*s/Hz
DEFAULT_EPS2 = 1e-7            # seconds
IB_MAX_OUTER_ITERATIONS = 10**6
IB_INVALID_TOPOLOGY_ITERATIONS = 10_000  # any slot vector gives min B <= 0 there
IB_STALL_ITERATIONS = 200      # outer iterations allowed without the gap shrinking
IB_PROGRESS_FRACTION = 1e-3    # relative gap reduction that counts as progress
SLOT_SUM_TOLERANCE = 1e-12     # relative to T

# Packet Tracing Settings
DEFAULT_BUDGET_THRESHOLD = 0.01
ROW_SUM_TOLERANCE = 1e-6

# Generator / ADAM Settings
DEFAULT_LEARNING_RATE = 0.001
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_ADAM_EPSILON = 1e-8
PATIENCE_BASE_EPOCHS = 30
PATIENCE_SCALE_EPOCHS = 500
DEFAULT_MAX_EPOCHS = 2000
DEFAULT_SNAPSHOT_EPOCHS = (0, 10, 50)
CHECKPOINT_FORMAT_VERSION = 1

# Baseline Settings
OPTIMAL_MAX_DEVICES = 8

# Experiment Settings
DEFAULT_SEEDS_PER_CELL = 10
DEFAULT_BASE_SEED = 2023
DEFAULT_WORKERS = 1
DEFAULT_OUTPUT_DIR = "results"
SCHEMES = ("direct", "mst", "greedy", "opt", "proposed")

# Environment variables (read through python-dotenv)
ENV_WORKERS = "RELAY_WORKERS"
ENV_OUTPUT_DIR = "RELAY_OUTPUT_DIR"
