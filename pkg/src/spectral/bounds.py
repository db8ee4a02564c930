import logging
import math
import numpy as np
import pandas as pd
from dataclasses import asdict, dataclass
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import gamma as gamma_function
from typing import Callable, Dict, List, Optional, Tuple

from spectral.constants import (
    INTEGRAND_COLUMNS,
    MIN_OMEGA2_SAMPLES,
    POWER_LAW_CUT,
    SUPPORT_CUT,
    TAIL_CUTS,
)
from spectral.potential import effective_potential_table, effective_potential_theta
from spiral.geometry import SpiralSpec, arc_length, normal_crossing, speed
from spiral.window import GeometryWindow
from utils.constants import (
    BOUND_QUAD_REL_TOL,
    DEFAULT_R_FACTOR,
    QUAD_LIMIT,
    TAIL_FIT_POINTS,
)
from utils.exceptions import BoundError, GeometryError, QuadratureError
from utils.utils import fit_power_law, positive_part, with_neighbours


MAIN_SIGMA = 1.5


@dataclass(frozen=True)
class BoundParams:
    """
    :param sigma: float
        moment order, >= 1/2
    :param threshold: float
        spectral threshold Lambda; None means 1/(4 a0^2)
    :param r_factor: float
        constant r(sigma, 1) of the one-dimensional inequality; None means 1
        for sigma >= 3/2 and DEFAULT_R_FACTOR below
    :param tail_cut: str
        "support" requires the positive part to vanish before the horizon,
        "power_law" closes a remaining tail with a fitted s^(-k) decay
    """

    sigma: float
    threshold: Optional[float] = None
    r_factor: Optional[float] = None
    quad_rel_tol: float = BOUND_QUAD_REL_TOL
    tail_cut: str = POWER_LAW_CUT

    def __post_init__(self):
        if not self.sigma >= 0.5:
            raise BoundError(f"sigma must be >= 1/2, got {self.sigma}")
        if self.tail_cut not in TAIL_CUTS:
            raise BoundError(f"unknown tail_cut {self.tail_cut!r}, expected one of {TAIL_CUTS}")
        if not self.quad_rel_tol > 0:
            raise BoundError(f"quad_rel_tol must be positive, got {self.quad_rel_tol}")
        if self.threshold is not None and not self.threshold > 0:
            raise BoundError(f"threshold must be positive, got {self.threshold}")
        if self.r_factor is not None:
            if not self.r_factor > 0:
                raise BoundError(f"r_factor must be positive, got {self.r_factor}")
            if self.sigma >= MAIN_SIGMA and self.r_factor != 1:
                raise BoundError(f"r_factor is 1 for sigma >= 3/2, got {self.r_factor}")
            if self.r_factor > 2:
                raise BoundError(f"r_factor must not exceed 2, got {self.r_factor}")

    @property
    def resolved_r_factor(self) -> float:
        if self.r_factor is not None:
            return self.r_factor
        return 1.0 if self.sigma >= MAIN_SIGMA else DEFAULT_R_FACTOR

    def resolved_threshold(self, a0: float) -> float:
        return self.threshold if self.threshold is not None else 1 / (4 * a0 ** 2)


@dataclass(frozen=True)
class BoundResult:
    """
    Right-hand side of the moment bound, total = integral_term + omega2_term

    integral_term includes tail_estimate, the part closed beyond the horizon;
    s_star is the last arc length with a nonzero positive part (the horizon
    when the support is not bounded) and None when the positive part never
    appears.
    """

    sigma: float
    variant: str
    threshold: float
    integral_term: float
    omega2_term: float
    total: float
    quad_error_estimate: float
    s_star: Optional[float]
    support_bounded: bool
    tail_estimate: float = 0.0

    def to_row(self) -> Dict:
        return asdict(self)


def lt_constant_1(sigma: float) -> float:
    """
    Gamma(sigma + 1) / (sqrt(4 pi) Gamma(sigma + 3/2))
    """
    if sigma < 0:
        raise BoundError(f"sigma must be nonnegative, got {sigma}")
    return float(gamma_function(sigma + 1) / (math.sqrt(4 * math.pi) * gamma_function(sigma + 1.5)))


def lt_constant_2(sigma: float) -> float:
    """
    1 / (4 pi (sigma + 1))
    """
    if sigma < 0:
        raise BoundError(f"sigma must be nonnegative, got {sigma}")
    return 1 / (4 * math.pi * (sigma + 1))


def _segments_cross(p: np.ndarray, q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    o1 = cross(q - p, a - p)
    o2 = cross(q - p, b - p)
    o3 = cross(b - a, p - a)
    o4 = cross(b - a, q - a)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def _shoelace(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def omega2_area(spec: SpiralSpec, theta0: float, n_samples: int = MIN_OMEGA2_SAMPLES) -> float:
    """
    Area enclosed by the spiral arc from tau* to theta0 and the normal
    segment at theta0, tau* being the parameter where that normal meets the
    previous coil. The polyline area is refined once by Richardson
    extrapolation in the number of arc samples.
    """
    n_samples = max(int(n_samples), MIN_OMEGA2_SAMPLES)
    _, tau = normal_crossing(spec, theta0)

    areas = []
    for n in (n_samples, 2 * n_samples):
        points = spec.curve(np.linspace(tau, theta0, n + 1))
        start, end = points[-1], points[0]
        crossed = _segments_cross(start, end, points[1:-2], points[2:-1])
        if crossed.any():
            raise GeometryError(
                f"closing normal segment at theta0={theta0:.6g} crosses the arc "
                f"{int(crossed.sum())} times: invalid window"
            )
        areas.append(_shoelace(points))
    return (4 * areas[1] - areas[0]) / 3


def omega2_volume(window: GeometryWindow) -> float:
    return omega2_area(window.spec, window.theta0)


def integral_prefactor(params: BoundParams) -> float:
    """
    r(sigma, 1) * L_{sigma,1}; r(sigma, 1) = 1 for sigma >= 3/2
    """
    return params.resolved_r_factor * lt_constant_1(params.sigma)


def volume_prefactor(params: BoundParams, threshold: float) -> float:
    """
    Coefficient of vol(Omega_2) in the bound: 2 L_{sigma,2} Lambda^(sigma+1)
    for sigma >= 3/2 and 4 (sigma/(sigma+1))^sigma L_{sigma,2} Lambda^(sigma+1) below
    """
    sigma = params.sigma
    power = threshold ** (sigma + 1)
    if sigma >= MAIN_SIGMA:
        return 2 * lt_constant_2(sigma) * power
    return 4 * (sigma / (sigma + 1)) ** sigma * lt_constant_2(sigma) * power


def main_density(w_eff: float, d: float, threshold: float, sigma: float) -> float:
    """
    (2/pi) sqrt(W~ + Lambda) (W~ + Lambda - (pi/d)^2)_+^(sigma+1/2) d
    """
    level = w_eff + threshold
    return 2 / math.pi * math.sqrt(level) * positive_part(level - (math.pi / d) ** 2) ** (sigma + 0.5) * d


def transverse_density(w_eff: float, d: float, threshold: float, sigma: float) -> float:
    """
    2 sum_j (W~ + Lambda - (pi j/d)^2)_+^(sigma+1/2)
    """
    level = w_eff + threshold
    modes = int(math.floor(math.sqrt(level) * d / math.pi))
    if modes < 1:
        return 0.0
    j = np.arange(1, modes + 1)
    return float(2 * np.sum(positive_part(level - (math.pi * j / d) ** 2) ** (sigma + 0.5)))


Density = Callable[[float, float, float, float], float]


def _table_levels(window: GeometryWindow, threshold: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    W~ + Lambda - (pi/d)^2 and W~ at every table row
    """
    w_eff = effective_potential_table(window)
    return w_eff + threshold - (math.pi / window.samples["d"].to_numpy()) ** 2, w_eff


def _level_theta(spec: SpiralSpec, theta: float, threshold: float) -> float:
    w_eff, d = effective_potential_theta(spec, theta)
    return w_eff + threshold - (math.pi / d) ** 2


def integrate_piece(
    integrand: Callable[[float], float], lo: float, hi: float, rel_tol: float
) -> Tuple[float, float]:
    result = quad(integrand, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=QUAD_LIMIT, full_output=1)
    value, error = float(result[0]), float(result[1])
    # roundoff warnings are harmless once the estimate meets the tolerance
    if len(result) > 3 and error > rel_tol * abs(value):
        raise QuadratureError(f"bound quadrature failed: {result[3]}", interval=(lo, hi))
    return value, error


def _integrate(
    window: GeometryWindow, params: BoundParams, density: Density
) -> Tuple[float, float, Optional[float], bool, float]:
    """
    Integral of density(W~, d) over [s0, horizon], written in theta with the
    Jacobian s'(theta), plus the closed tail

    Only table intervals where the positive part is seen (at the ends or the
    midpoint), together with their neighbours, are integrated; elsewhere the
    density vanishes identically.

    :return: (integral, error, s_star, support_bounded, tail_estimate)
    """
    spec = window.spec
    sigma = params.sigma
    threshold = params.resolved_threshold(window.a0)
    thetas = window.samples["theta"].to_numpy()
    s_col = window.samples["s"].to_numpy()

    levels, w_eff = _table_levels(window, threshold)
    midpoints = 0.5 * (thetas[:-1] + thetas[1:])
    mid_levels = np.array([_level_theta(spec, t, threshold) for t in midpoints])

    seen = (levels[:-1] > 0) | (levels[1:] > 0) | (mid_levels > 0)
    supported = with_neighbours(seen)

    def integrand(theta: float) -> float:
        w_eff, d = effective_potential_theta(spec, theta)
        return density(w_eff, d, threshold, sigma) * speed(spec, theta)

    total, error = 0.0, 0.0
    for k in np.flatnonzero(supported):
        value, err = integrate_piece(integrand, thetas[k], thetas[k + 1], params.quad_rel_tol)
        total += value
        error += err

    if not seen.any():
        return total, error, None, True, 0.0

    if levels[-1] <= 0:
        last = int(np.flatnonzero(seen)[-1])
        lo = midpoints[last] if mid_levels[last] > 0 else thetas[last]
        if levels[last] > 0 and mid_levels[last] <= 0:
            hi = midpoints[last]
        else:
            hi = thetas[last + 1]
        theta_star = brentq(lambda t: _level_theta(spec, t, threshold), lo, hi)
        s_star = s_col[last] + arc_length(spec, theta_star, start=thetas[last])
        _log_negative_tail(s_col[last + 1:], levels[last + 1:])
        return total, error, float(s_star), True, 0.0

    if params.tail_cut == SUPPORT_CUT:
        raise BoundError(
            f"support not localized: W~ + Lambda - (pi/d)^2 = {levels[-1]:.6g} > 0 "
            f"at the horizon s={window.horizon:.6g}"
        )
    tail = _power_law_tail(window, params, density, threshold, w_eff)
    return total + tail, error, float(window.horizon), False, tail


def _log_negative_tail(s_values: np.ndarray, levels: np.ndarray):
    strict = levels < 0
    s_values, levels = s_values[strict], levels[strict]
    if len(s_values) < 3:
        logging.info("positive part vanishes at the last samples, no decay fit")
        return
    coef, k = fit_power_law(s_values, -levels)
    logging.info(
        f"positive part certified zero on the last {len(s_values)} samples, "
        f"(pi/d)^2 - W~ - Lambda ~ {coef:.4g} * s^(-{k:.4g})"
    )


def _power_law_tail(
    window: GeometryWindow,
    params: BoundParams,
    density: Density,
    threshold: float,
    w_eff: np.ndarray,
) -> float:
    rows = window.samples.tail(TAIL_FIT_POINTS)
    values = np.array([
        density(w, d, threshold, params.sigma)
        for w, d in zip(w_eff[-len(rows):], rows["d"])
    ])
    positive = np.flatnonzero(values <= 0)
    start = int(positive[-1]) + 1 if positive.size else 0
    s_values, values = rows["s"].to_numpy()[start:], values[start:]
    if len(values) < 3:
        raise BoundError("support not localized and too few positive tail samples for a decay fit")
    coef, k = fit_power_law(s_values, values)
    if not k > 1:
        raise BoundError(f"tail not integrable: integrand ~ s^(-{k:.4g}) at the horizon")
    horizon = window.horizon
    tail = coef * horizon ** (1 - k) / (k - 1)
    logging.info(
        f"sigma={params.sigma}: integrand ~ {coef:.4g} * s^(-{k:.4g}) beyond s={horizon:.6g}, "
        f"tail estimate {tail:.6g}"
    )
    return float(tail)


def _bound(
    window: GeometryWindow, params: BoundParams, density: Density, variant: str
) -> BoundResult:
    threshold = params.resolved_threshold(window.a0)
    integral, error, s_star, bounded, tail = _integrate(window, params, density)
    integral *= integral_prefactor(params)
    error *= integral_prefactor(params)
    tail *= integral_prefactor(params)
    omega2 = volume_prefactor(params, threshold) * omega2_volume(window)
    return BoundResult(
        sigma=params.sigma,
        variant=variant,
        threshold=threshold,
        integral_term=integral,
        omega2_term=omega2,
        total=integral + omega2,
        quad_error_estimate=error,
        s_star=s_star,
        support_bounded=bounded,
        tail_estimate=tail,
    )


def bound_main(window: GeometryWindow, params: BoundParams) -> BoundResult:
    """
    Moment bound for sigma >= 3/2
    """
    if params.sigma < MAIN_SIGMA:
        raise BoundError(f"bound_main needs sigma >= 3/2, got {params.sigma}; use bound_low_sigma")
    return _bound(window, params, main_density, "main")


def bound_low_sigma(window: GeometryWindow, params: BoundParams) -> BoundResult:
    """
    Moment bound for 1/2 <= sigma < 3/2, carrying r(sigma, 1) and the
    (sigma/(sigma+1))^sigma volume factor
    """
    if params.sigma >= MAIN_SIGMA:
        raise BoundError(f"bound_low_sigma needs sigma < 3/2, got {params.sigma}; use bound_main")
    return _bound(window, params, main_density, "low_sigma")


def bound_transverse_sum(window: GeometryWindow, params: BoundParams) -> BoundResult:
    """
    Sharper intermediate form keeping the sum over transverse modes; never
    larger than bound_main / bound_low_sigma at the same parameters
    """
    return _bound(window, params, transverse_density, "transverse_sum")


def evaluate_bound(window: GeometryWindow, params: BoundParams) -> BoundResult:
    if params.sigma >= MAIN_SIGMA:
        return bound_main(window, params)
    return bound_low_sigma(window, params)


def integrand_profile(window: GeometryWindow, params: BoundParams) -> pd.DataFrame:
    """
    Positive part and bound integrand at every table row, for plotting
    """
    threshold = params.resolved_threshold(window.a0)
    levels, w_eff = _table_levels(window, threshold)
    prefactor = integral_prefactor(params)
    rows = window.samples
    integrand: List[float] = [
        prefactor * main_density(w, d, threshold, params.sigma)
        for w, d in zip(w_eff, rows["d"])
    ]
    return pd.DataFrame(
        {
            "theta": rows["theta"],
            "s": rows["s"],
            "positive_part": positive_part(levels),
            "integrand": integrand,
        },
        columns=INTEGRAND_COLUMNS,
    )
