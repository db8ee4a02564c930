INTERIOR = 0
DIRICHLET_CURVE = 1
DIRICHLET_OUTER = 2

# h <= a0 / RESOLUTION_FACTOR
RESOLUTION_FACTOR = 8
MIN_CROSS_SECTION_NODES = 6
# polyline segments are at most this fraction of h
CURVE_SEGMENT_FRACTION = 0.25

SHIFT_INVERT = "shift_invert"
LOBPCG = "lobpcg"
SOLVER_METHODS = (SHIFT_INVERT, LOBPCG)
MAX_SOLVER_ITERATIONS = 1000
MAX_EIGENVALUES = 256
DEFAULT_EIGENVALUES = 6

EIGENVALUE_COLUMNS = ["index", "eigenvalue", "residual", "absolute_residual", "below_threshold"]
