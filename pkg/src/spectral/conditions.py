import logging
import math
import numpy as np
import pandas as pd
from dataclasses import asdict, dataclass
from tqdm.auto import tqdm
from typing import Dict, NamedTuple, Tuple

from spectral.bounds import integrate_piece
from spectral.constants import (
    CERTIFIED,
    CERTIFIED_DECAY_LIMIT,
    DECAY_SLOPE_TOLERANCE,
    DEFAULT_TIE_TOLERANCE,
    DIAGNOSTIC_COLUMNS,
    DIAGNOSTIC_POINTS,
    DIAGNOSTIC_ROOT_TOL,
    DIAGNOSTIC_THETA_RANGE,
    INCONCLUSIVE,
    LOCAL_DECAY_LIMIT,
    TAIL_FRACTION,
    VIOLATED,
)
from spectral.potential import effective_potential_table, effective_potential_value
from spiral.geometry import arc_length, coil_width, curvature_chain, speed
from spiral.window import GeometryWindow
from utils.constants import BOUND_QUAD_REL_TOL, TAIL_FIT_POINTS, TWO_PI
from utils.exceptions import CertificateError
from utils.utils import fit_power_law, positive_part, with_neighbours


@dataclass(frozen=True)
class CertificateReport:
    """
    Outcome of the check 2 pi a0 - d(s) >= alpha W~(s) on the sample grid

    worst_pointwise_margin is the minimum of
    (2 pi a0 - d) - (2 a0 d)^2 W~ / (2 pi a0 + d), the form that forces the
    positive part of the bound integrand to vanish; tail_relative_margin is
    the minimum of margin / (alpha W~) over the last quarter of the samples.
    """

    verdict: str
    alpha: float
    worst_margin: float
    worst_s: float
    worst_pointwise_margin: float
    worst_pointwise_s: float
    tail_relative_margin: float
    width_decay_exponent: float

    def to_dict(self) -> Dict:
        return asdict(self)


class TailIntegrability(NamedTuple):
    finite: bool
    tail_estimate: float


def certificate_alpha(window: GeometryWindow) -> float:
    """
    alpha = 4 a0^2 inf_{z >= s0} d(z)^2 / (2 pi a0 + d(z))

    The infimum runs over the samples and the limit value pi a0 of d -> 2 pi a0.
    """
    a0 = window.a0
    d = window.samples["d"].to_numpy()
    ratio = min(float(np.min(d ** 2 / (TWO_PI * a0 + d))), math.pi * a0)
    return 4 * a0 ** 2 * ratio


def _log_decay_comparison(window: GeometryWindow, gap: np.ndarray, rhs: np.ndarray):
    rows = window.samples.tail(TAIL_FIT_POINTS)
    n = len(rows)
    thetas = rows["theta"].to_numpy()
    if np.all(gap[-n:] > 0) and np.all(rhs[-n:] > 0):
        _, left = fit_power_law(thetas, gap[-n:])
        _, right = fit_power_law(thetas, rhs[-n:])
        logging.info(
            f"certificate decay: 2pi*a0 - d ~ theta^(-{left:.4g}), alpha*W~ ~ theta^(-{right:.4g}), "
            f"family exponent {window.spec.rho.width_decay_exponent:.4g}"
        )
    else:
        logging.info("certificate decay: left side not positive on the tail, no fit")


def no_discrete_spectrum_certificate(
    window: GeometryWindow, tie_tolerance: float = DEFAULT_TIE_TOLERANCE
) -> CertificateReport:
    a0 = window.a0
    s = window.samples["s"].to_numpy()
    d = window.samples["d"].to_numpy()
    w_eff = effective_potential_table(window)
    alpha = certificate_alpha(window)

    gap = TWO_PI * a0 - d
    rhs = alpha * w_eff
    margin = gap - rhs
    pointwise = gap - (2 * a0 * d) ** 2 * w_eff / (TWO_PI * a0 + d)

    tail = max(int(math.ceil(TAIL_FRACTION * len(s))), 1)
    tail_relative = float(np.min(margin[-tail:] / rhs[-tail:]))
    exponent = window.spec.rho.width_decay_exponent

    worst = int(np.argmin(margin))
    worst_pointwise = int(np.argmin(pointwise))
    if np.any(gap < 0) or tail_relative < -tie_tolerance:
        verdict = VIOLATED
    elif margin.min() >= 0 and pointwise.min() >= 0 and exponent < CERTIFIED_DECAY_LIMIT:
        verdict = CERTIFIED
    else:
        verdict = INCONCLUSIVE

    _log_decay_comparison(window, gap, rhs)
    report = CertificateReport(
        verdict=verdict,
        alpha=alpha,
        worst_margin=float(margin[worst]),
        worst_s=float(s[worst]),
        worst_pointwise_margin=float(pointwise[worst_pointwise]),
        worst_pointwise_s=float(s[worst_pointwise]),
        tail_relative_margin=tail_relative,
        width_decay_exponent=exponent,
    )
    logging.info(f"{window.spec.family}: certificate {verdict}, worst margin {report.worst_margin:.6g} at s={report.worst_s:.6g}")
    return report


def _positive_part_slope(window: GeometryWindow) -> float:
    """
    Fitted s-exponent of W~ + 1/(4 a0^2) - (pi/d)^2 over the tail rows where it is positive
    """
    rows = window.samples.tail(TAIL_FIT_POINTS)
    w_eff = effective_potential_table(window)[-len(rows):]
    levels = w_eff + 1 / (4 * window.a0 ** 2) - (math.pi / rows["d"].to_numpy()) ** 2
    positive = levels > 0
    if positive.sum() < 3:
        return -math.inf
    _, k = fit_power_law(rows["s"].to_numpy()[positive], levels[positive])
    return -k


def tail_integrability(
    window: GeometryWindow, sigma: float, rel_tol: float = BOUND_QUAD_REL_TOL
) -> TailIntegrability:
    """
    Integral of (d(s) - 2 pi a0)_+^(sigma+1/2) over [s0, horizon]

    The excess has to vanish before the horizon. For sigma = 1/2 and
    perturbations that are Archimedean beyond some angle, the bound
    integrand has to decay at least like s^(-3/2) as well.
    """
    if sigma < 0.5:
        raise CertificateError(f"sigma must be >= 1/2, got {sigma}")
    spec = window.spec
    limit = TWO_PI * window.a0
    thetas = window.samples["theta"].to_numpy()
    excess = window.samples["d"].to_numpy() - limit
    if excess[-1] > 0:
        raise CertificateError(
            f"undetermined: d - 2pi*a0 = {excess[-1]:.6g} > 0 at the horizon s={window.horizon:.6g}"
        )

    midpoints = 0.5 * (thetas[:-1] + thetas[1:])
    mid_excess = np.array([coil_width(spec, t) - limit for t in midpoints])
    seen = (excess[:-1] > 0) | (excess[1:] > 0) | (mid_excess > 0)

    def integrand(theta: float) -> float:
        return positive_part(coil_width(spec, theta) - limit) ** (sigma + 0.5) * speed(spec, theta)

    estimate = 0.0
    for k in np.flatnonzero(with_neighbours(seen)):
        estimate += integrate_piece(integrand, thetas[k], thetas[k + 1], rel_tol)[0]

    if sigma == 0.5 and spec.rho.archimedean_beyond is not None:
        slope = _positive_part_slope(window)
        if slope > LOCAL_DECAY_LIMIT + DECAY_SLOPE_TOLERANCE:
            raise CertificateError(
                f"undetermined: positive part decays like s^({slope:.4g}), slower than s^({LOCAL_DECAY_LIMIT})"
            )
        logging.info(f"positive part decays like s^({slope:.4g}) on the tail")
    return TailIntegrability(finite=True, tail_estimate=float(estimate))


def width_expansion(a0: float, theta: float) -> Tuple[float, float]:
    """
    Large-theta expansion of (pi/d)^2 for the Archimedean spiral, as
    (four-term value, theta^-5 coefficient); the theta^-5 coefficient is
    pi (4 pi^2 - 1) / (2 a0^2)
    """
    scale = 1 / a0 ** 2
    four = scale * (
        0.25
        + 1 / (4 * theta ** 2)
        + math.pi / (2 * theta ** 3)
        + math.pi ** 2 / theta ** 4
    )
    return four, scale * math.pi * (4 * math.pi ** 2 - 1) / 2


def asymptotic_diagnostics(
    window: GeometryWindow,
    theta_range: Tuple[float, float] = DIAGNOSTIC_THETA_RANGE,
    points: int = DIAGNOSTIC_POINTS,
) -> pd.DataFrame:
    """
    Residuals of the large-theta laws on a log grid of theta

    expansion_residual is (pi/d)^2 minus its five-term expansion and
    scaled_residual its theta^6 multiple; fifth_order_estimate is the
    four-term residual times theta^5. The other columns are
    gamma a0 theta - 1, 2 s / (a0 theta^2) - 1 and 8 a0 s W~ - 1, the last one
    NaN below theta0.
    """
    spec = window.spec
    if spec.rho.archimedean_beyond is None:
        raise CertificateError(
            f"asymptotic diagnostics need a family that is Archimedean beyond some angle, got {spec.family!r}"
        )
    a0 = spec.a0
    thetas = np.geomspace(theta_range[0], theta_range[1], points)

    rows = []
    s, previous = 0.0, 0.0
    for theta in tqdm(thetas, desc="diagnostics", leave=False):
        s += arc_length(spec, theta, start=previous)
        previous = theta
        d = coil_width(spec, theta, root_tol=DIAGNOSTIC_ROOT_TOL)
        gamma, dgamma, ddgamma = curvature_chain(spec, theta)
        value = (math.pi / d) ** 2
        four, fifth = width_expansion(a0, theta)
        residual = value - four - fifth / theta ** 5
        if theta >= window.theta0:
            w_eff = effective_potential_value(gamma, dgamma, ddgamma, d)
            potential_residual = 8 * a0 * s * w_eff - 1
        else:
            potential_residual = math.nan
        rows.append({
            "theta": theta,
            "s": s,
            "d": d,
            "expansion_residual": residual,
            "scaled_residual": theta ** 6 * abs(residual),
            "fifth_order_estimate": (value - four) * theta ** 5,
            "curvature_residual": gamma * a0 * theta - 1,
            "arc_length_residual": 2 * s / (a0 * theta ** 2) - 1,
            "potential_residual": potential_residual,
        })
    table = pd.DataFrame(rows, columns=DIAGNOSTIC_COLUMNS)
    logging.info(
        f"{spec.family}: sup theta^6 |R| = {table['scaled_residual'].max():.6g} on "
        f"theta in [{theta_range[0]:g}, {theta_range[1]:g}]"
    )
    return table
