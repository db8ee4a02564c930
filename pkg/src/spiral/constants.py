import math


# bump profile (4 t (1 - t))^5
BUMP_EXPONENT = 5
BUMP_NORMALIZATION = 4.0 ** BUMP_EXPONENT

# marching step along the normal, in units of a0
NORMAL_STEP = math.pi / 4

# rows used for the beyond-horizon decay check of d * gamma
EXTRAPOLATION_ROWS = 6

# relative slack when comparing d with 2*pi*a0 + sup|rho(. + 2pi) - rho|
WIDTH_BOUND_SLACK = 1e-9

SAMPLE_COLUMNS = ["theta", "s", "gamma", "dgamma", "ddgamma", "d"]

# parameters a family starts from when it is picked without any
FAMILY2DEFAULTS = {
    "pure": {},
    "power_tail": {"c": 0.5, "p": 1.5},
    "bump": {"amplitude": 0.5, "theta1": 30.0, "theta2": 30.0 + 2 * math.pi},
}
