DEFAULT_TIE_TOLERANCE = 0.1
TAIL_FRACTION = 0.25
CERTIFIED_DECAY_LIMIT = 2.0

POWER_LAW_CUT = "power_law"
SUPPORT_CUT = "support"
TAIL_CUTS = (SUPPORT_CUT, POWER_LAW_CUT)

MIN_OMEGA2_SAMPLES = 4096

# s-decay of the positive part needed for sigma = 1/2
LOCAL_DECAY_LIMIT = -1.5
DECAY_SLOPE_TOLERANCE = 0.1

DIAGNOSTIC_THETA_RANGE = (10.0, 100.0)
DIAGNOSTIC_POINTS = 50
DIAGNOSTIC_ROOT_TOL = 1e-14

INTEGRAND_COLUMNS = ["theta", "s", "positive_part", "integrand"]
DIAGNOSTIC_COLUMNS = [
    "theta",
    "s",
    "d",
    "expansion_residual",
    "scaled_residual",
    "fifth_order_estimate",
    "curvature_residual",
    "arc_length_residual",
    "potential_residual",
]

CERTIFIED = "certified_absent_beyond_s0"
INCONCLUSIVE = "inconclusive_marginal"
VIOLATED = "violated"
