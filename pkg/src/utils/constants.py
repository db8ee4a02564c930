import math


TWO_PI = 2.0 * math.pi

# quadrature and root finding
QUAD_REL_TOL = 1e-10
QUAD_LIMIT = 500
ROOT_TOL = 1e-12
INVERSION_TOL = 1e-10

# s0 search
DEFAULT_MARGIN = 0.1
THETA_RATIO = 1.05
THETA_MIN = TWO_PI

# finite differences of curvature in theta
FD_STEP = 1e-4

# bound engine
BOUND_QUAD_REL_TOL = 1e-8
DEFAULT_R_FACTOR = 2.0
TAIL_FIT_POINTS = 8

# fd oracle
SOLVER_TOL = 1e-8
DEFAULT_SEED = 0

# output
FLOAT_FORMAT = "%.17g"
CSV_EXTENSION = ".csv"
JSON_EXTENSION = ".json"
