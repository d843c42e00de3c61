# Geometry defaults
DEFAULT_STRAIGHT_FROM = 3.0
DEFAULT_MIN_WIDTH = 1.0
WALL_TOLERANCE = 1e-12
DEFAULT_QUALITY_FLOOR = 0.2

# Boundary tags (edges and nodes share the codes)
TAG_INTERIOR = 0
TAG_WALL_LOWER = 1
TAG_WALL_UPPER = 2
TAG_END_LEFT = 3
TAG_END_RIGHT = 4
TAG_NAMES = {
    TAG_INTERIOR: "interior",
    TAG_WALL_LOWER: "wall_lower",
    TAG_WALL_UPPER: "wall_upper",
    TAG_END_LEFT: "end_left",
    TAG_END_RIGHT: "end_right",
}
WALL_TAGS = (TAG_WALL_LOWER, TAG_WALL_UPPER)
END_TAGS = (TAG_END_LEFT, TAG_END_RIGHT)

# Carrier cutoffs
MU_BLEND_FRACTION = 0.01  # of the log-width 1/eps, per rounded corner
PI_SMOOTH_RELAXATION = 0.1
PI_SMOOTH_STEP_WIDTH = 0.02  # in units of the transition width d/2
EPSILON_FLOOR = 0.05
EPSILON_CELLS = 8
EPSILON_CAP = 0.9
LAYER_SAMPLES_MIN = 8

# Quadrature
GRADED_RATIO = 0.3
GRADED_GAUSS_POINTS = 4
GRADED_TANGENT_POINTS = 6
GRADED_MAX_LEVELS = 40
COMPOSITE_REFINEMENTS = 2
STANDARD_DEGREE = 4
NONLINEAR_DEGREE = 6
CARRIER_EXTRA_DEGREE = 2
SECTION_GAUSS_POINTS = 8
ASSEMBLY_CHUNK = 8192

# Solver defaults
DEFAULT_PICARD_TOL = 1e-8
DEFAULT_MAX_ITERS = 50
DEFAULT_DAMPING = 1.0
DAMPING_FLOOR = 0.125
DEFAULT_DELTA_TARGET = 0.25
LINEAR_RESIDUAL_TOL = 1e-10
SCHUR_RESTART = 50

# Analysis
EIGEN_TOL = 1e-10
EIGEN_MAX_ITER = 5000
RIGID_MOTION_FLOOR = 1e-8
EXACT_ZERO_LEVEL = 1e-14
DECAY_FD_STEP = 0.05
DECAY_CONSISTENCY = 0.2
GROWTH_TAIL_SLOPE = -0.1
GROWTH_TAIL_FLOOR = 0.1  # relative to the largest normalized tail value
SAINT_VENANT_EXPONENT = 1.5
START_SCALE = 0.1
FLUX_STATIONS = 9
ASCENT_STEPS = 20
BOGOVSKII_MEAN_TOL = 1e-10
FLUX_STATION_TOL = 1e-8

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_INVARIANT = 3

# VTK cell types
VTK_LINE = 3
VTK_TRIANGLE = 5

# CSV schemas
CHECK_COLUMNS = ["name", "value", "tolerance", "passed"]
ITERATION_COLUMNS = ["iteration", "increment", "residual", "damping"]
DECAY_COLUMNS = ["t", "y_plus", "y_minus", "dy_plus_fd", "edge_energy"]
GROWTH_COLUMNS = ["t", "slab_h1", "slab_l4", "cumulative_grad", "normalized"]
CONSTANT_COLUMNS = ["name", "value", "provenance"]
SWEEP_COLUMNS = ["epsilon", "dist", "max_ratio", "certified"]
CONVERGENCE_COLUMNS = [
    "h",
    "velocity_h1_error",
    "pressure_l2_error",
    "velocity_order",
    "pressure_order",
]
DISTANCE_COLUMNS = ["start_a", "start_b", "h1_distance"]
FLOAT_FORMAT = "%.17g"

# Log Prefixes
LOG_PREFIX_CONFIG = "config"
LOG_PREFIX_MESH = "mesh build"
LOG_PREFIX_CARRIER = "carrier"
LOG_PREFIX_ASSEMBLY = "assembly"
LOG_PREFIX_SADDLE = "saddle solve"
LOG_PREFIX_PICARD = "picard"
LOG_PREFIX_EIGEN = "eigen solve"
LOG_PREFIX_DECAY = "decay"
LOG_PREFIX_UNIQUENESS = "uniqueness"
LOG_PREFIX_EXPORT = "export"
