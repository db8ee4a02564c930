import math
import numpy as np
from dataclasses import dataclass
from scipy.integrate import quad
from scipy.optimize import brentq, newton
from typing import Optional, Tuple

from spiral.constants import NORMAL_STEP
from spiral.families import Perturbation, Pure
from utils.constants import (
    FD_STEP,
    INVERSION_TOL,
    QUAD_LIMIT,
    QUAD_REL_TOL,
    ROOT_TOL,
    TWO_PI,
)
from utils.exceptions import GeometryError, QuadratureError
from utils.utils import richardson_derivatives, wrap_angle


@dataclass(frozen=True)
class SpiralSpec:
    """
    Spiral r(theta) = a0 * theta + rho(theta), theta >= 0

    :param a0: float
        asymptotic coil spacing per radian
    :param rho: Perturbation
        perturbation family with analytic rho, rho', rho''
    """

    a0: float
    rho: Perturbation = Pure()

    def __post_init__(self):
        if not self.a0 > 0:
            raise GeometryError(f"a0 must be positive, got {self.a0}")
        if self.a0 + self.rho.min_slope() <= 0:
            raise GeometryError(
                f"r is not increasing: a0 + inf rho' = {self.a0 + self.rho.min_slope():.6g} <= 0"
            )

    @property
    def family(self) -> str:
        return self.rho.name

    def scaled(self, factor: float) -> "SpiralSpec":
        return SpiralSpec(a0=self.a0 * factor, rho=self.rho.scaled(factor))

    def curve(self, thetas: np.ndarray) -> np.ndarray:
        """
        Cartesian points of the curve, shape (n, 2)
        """
        thetas = np.asarray(thetas, dtype=float)
        r = self.a0 * thetas + self.rho.value(thetas)
        return np.column_stack([r * np.cos(thetas), r * np.sin(thetas)])


def radial_profile(spec: SpiralSpec, theta: float) -> Tuple[float, float, float]:
    """
    r(theta), r'(theta), r''(theta)
    """
    if theta < 0:
        raise GeometryError(f"theta must be nonnegative, got {theta}")
    r = spec.a0 * theta + float(spec.rho.value(theta))
    rdot = spec.a0 + float(spec.rho.first(theta))
    rddot = float(spec.rho.second(theta))
    if rdot <= 0:
        raise GeometryError(f"monotonicity violated at theta={theta}: r'={rdot}")
    return r, rdot, rddot


def width_function(spec: SpiralSpec, theta: float) -> float:
    """
    a(theta) = (r(theta + 2pi) - r(theta)) / 2pi
    """
    width = (radial_profile(spec, theta + TWO_PI)[0] - radial_profile(spec, theta)[0]) / TWO_PI
    if width <= 0:
        raise GeometryError(f"nonpositive width {width} at theta={theta}: curve self-intersects")
    return width


def _curvature(r: float, rdot: float, rddot: float) -> float:
    q = r * r + rdot * rdot
    if q == 0:
        raise GeometryError("curvature undefined where r = r' = 0")
    return (r * r + 2 * rdot * rdot - r * rddot) / q ** 1.5


def curvature_theta(spec: SpiralSpec, theta: float) -> float:
    return _curvature(*radial_profile(spec, theta))


def _curvature_derivatives_analytic(spec: SpiralSpec, theta: float) -> Tuple[float, float, float]:
    r, r1, r2 = radial_profile(spec, theta)
    r3 = float(spec.rho.third(theta))
    r4 = float(spec.rho.fourth(theta))

    num = r * r + 2 * r1 * r1 - r * r2
    num1 = 2 * r * r1 + 3 * r1 * r2 - r * r3
    num2 = 2 * r1 * r1 + 2 * r * r2 + 3 * r2 * r2 + 2 * r1 * r3 - r * r4

    q = r * r + r1 * r1
    q1 = 2 * r * r1 + 2 * r1 * r2
    q2 = 2 * r1 * r1 + 2 * r * r2 + 2 * r2 * r2 + 2 * r1 * r3

    den = q ** 1.5
    den1 = 1.5 * q ** 0.5 * q1
    den2 = 0.75 * q ** -0.5 * q1 * q1 + 1.5 * q ** 0.5 * q2

    gamma = num / den
    gamma1 = (num1 * den - num * den1) / den ** 2
    gamma2 = (num2 * den - num * den2) / den ** 2 - 2 * den1 * (num1 * den - num * den1) / den ** 3
    return gamma, gamma1, gamma2


def curvature_theta_derivatives(
    spec: SpiralSpec, theta: float, method: str = "auto", step: float = FD_STEP
) -> Tuple[float, float, float]:
    """
    gamma(theta) with its first and second theta-derivatives

    :param method: str
        "analytic" needs rho''' and rho'''' from the family,
        "fd" uses Richardson-extrapolated central differences with step
        step * max(1, theta), "auto" prefers the analytic route
    """
    analytic = spec.rho.third(theta) is not None and spec.rho.fourth(theta) is not None
    if method == "analytic" and not analytic:
        raise GeometryError(f"family {spec.family!r} has no analytic rho''' / rho''''")
    if method in ("analytic", "auto") and analytic:
        return _curvature_derivatives_analytic(spec, theta)

    h = step * max(1.0, theta)
    if theta < h:
        raise GeometryError(f"theta={theta} too close to 0 for central differences")
    d1, d2 = richardson_derivatives(lambda t: curvature_theta(spec, t), theta, h)
    return curvature_theta(spec, theta), d1, d2


def curvature_chain(
    spec: SpiralSpec, theta: float, method: str = "auto"
) -> Tuple[float, float, float]:
    """
    gamma, d gamma / ds, d^2 gamma / ds^2 at the curve point theta, using
    s'(theta) = sqrt(r'^2 + r^2) and
    d^2 gamma / ds^2 = (gamma'' s' - gamma' s'') / s'^3
    """
    gamma, g1, g2 = curvature_theta_derivatives(spec, theta, method=method)
    r, rdot, rddot = radial_profile(spec, theta)
    speed = math.hypot(r, rdot)
    speed1 = (rdot * rddot + r * rdot) / speed
    return gamma, g1 / speed, (g2 * speed - g1 * speed1) / speed ** 3


def speed(spec: SpiralSpec, theta: float) -> float:
    r, rdot, _ = radial_profile(spec, theta)
    return math.hypot(r, rdot)


def arc_length(
    spec: SpiralSpec,
    theta: float,
    start: float = 0.0,
    rel_tol: float = QUAD_REL_TOL,
) -> float:
    """
    s(theta) - s(start) = integral of sqrt(r'^2 + r^2) over [start, theta]
    """
    if theta < 0 or start < 0:
        raise GeometryError(f"arc length needs nonnegative angles, got [{start}, {theta}]")
    if theta == start:
        return 0.0
    result = quad(
        lambda t: speed(spec, t),
        start,
        theta,
        epsabs=0.0,
        epsrel=rel_tol,
        limit=QUAD_LIMIT,
        full_output=1,
    )
    if len(result) > 3:
        info = result[2]
        last = info["last"]
        worst = int(np.argmax(info["elist"][:last]))
        raise QuadratureError(
            f"arc length quadrature failed on [{start}, {theta}]: {result[3]}",
            interval=(info["alist"][worst], info["blist"][worst]),
        )
    return float(result[0])


def _initial_theta(spec: SpiralSpec, s: float) -> float:
    # a0/2 theta^2 + r(0) theta = s
    r0 = float(spec.rho.value(0.0))
    return (-r0 + math.sqrt(r0 * r0 + 2 * spec.a0 * s)) / spec.a0


def invert_arc_length(
    spec: SpiralSpec,
    s: float,
    theta_hint: float = 0.0,
    s_hint: float = 0.0,
    tol: float = INVERSION_TOL,
) -> float:
    """
    theta(s) by Newton iteration on s(theta) - s, with a bracketing fallback

    :param theta_hint, s_hint: float
        a known pair s(theta_hint) = s_hint <= s; integration starts there
    """
    if s < 0:
        raise GeometryError(f"arc length must be nonnegative, got {s}")
    if s == s_hint:
        return theta_hint
    if s < s_hint:
        theta_hint, s_hint = 0.0, 0.0

    target = tol * max(1.0, s)

    def residual(theta: float) -> float:
        return s_hint + arc_length(spec, max(theta, 0.0), start=theta_hint) - s

    if theta_hint == 0.0:
        guess = _initial_theta(spec, s)
    else:
        guess = theta_hint + (s - s_hint) / speed(spec, theta_hint)

    theta = None
    try:
        theta = newton(
            residual,
            guess,
            fprime=lambda t: speed(spec, max(t, 0.0)),
            tol=target / max(1.0, speed(spec, guess)),
            maxiter=50,
        )
    except (RuntimeError, GeometryError):
        theta = None

    if theta is None or theta < theta_hint or abs(residual(theta)) > target:
        lo, hi = theta_hint, max(guess, theta_hint + 1.0)
        while residual(hi) < 0:
            lo, hi = hi, theta_hint + 2 * (hi - theta_hint)
        theta = brentq(
            residual,
            lo,
            hi,
            xtol=target / (4 * speed(spec, hi)),
            rtol=4 * np.finfo(float).eps,
        )
    return float(theta)


def fermi_map(spec: SpiralSpec, theta: float, u: float) -> Tuple[float, float]:
    """
    Point at distance u along the inward normal from the curve point at theta
    """
    r, rdot, _ = radial_profile(spec, theta)
    norm = math.hypot(rdot, r)
    c, s = math.cos(theta), math.sin(theta)
    x1 = r * c - u / norm * (rdot * s + r * c)
    x2 = r * s + u / norm * (rdot * c - r * s)
    return x1, x2


def normal_crossing(
    spec: SpiralSpec, theta: float, root_tol: float = ROOT_TOL
) -> Tuple[float, float]:
    """
    First intersection of the inward normal at theta with the previous coil

    The normal is marched in steps of a0*pi/4. Along the way the polar angle
    Theta(u) of the marching point is unwound continuously, starting from the
    angle theta - 2pi of the previous coil, and

        F(u) = |x(u)| - r(Theta(u))

    is positive until the point reaches that coil. The first sign change is
    bracketed and refined with brentq.

    :return: (d, tau) with d the normal length and tau the curve parameter
        of the inner endpoint
    """
    if theta < TWO_PI:
        raise GeometryError(f"coil width needs theta >= 2pi, got {theta}")

    step = NORMAL_STEP * spec.a0
    reach = TWO_PI * spec.a0 + spec.rho.sup_period_jump() + 2 * step
    n_steps = int(math.ceil(reach / step))

    def angle_from(u: float, u_ref: float, angle_ref: float) -> Tuple[float, float, float]:
        x1, x2 = fermi_map(spec, theta, u)
        y1, y2 = fermi_map(spec, theta, u_ref)
        delta = wrap_angle(math.atan2(x2, x1) - math.atan2(y2, y1))
        return x1, x2, angle_ref + delta

    def crossing(u: float, u_ref: float, angle_ref: float) -> float:
        x1, x2, angle = angle_from(u, u_ref, angle_ref)
        if angle < 0:
            raise GeometryError(f"normal at theta={theta} leaves the spiral through its start")
        return math.hypot(x1, x2) - radial_profile(spec, angle)[0]

    u_prev, angle_prev = 0.0, theta - TWO_PI
    for k in range(1, n_steps + 1):
        u = k * step
        if crossing(u, u_prev, angle_prev) <= 0:
            d = brentq(
                crossing,
                u_prev,
                u,
                args=(u_prev, angle_prev),
                xtol=root_tol * spec.a0,
                rtol=4 * np.finfo(float).eps,
            )
            tau = angle_from(d, u_prev, angle_prev)[2]
            return float(d), float(tau)
        angle_prev = angle_from(u, u_prev, angle_prev)[2]
        u_prev = u

    raise GeometryError(
        f"no crossing within {reach:.6g} along the normal at theta={theta}: "
        "geometry inconsistent with 2pi*a0 + sup|rho(.+2pi) - rho| + margin"
    )


def coil_width(spec: SpiralSpec, theta: float, root_tol: float = ROOT_TOL) -> float:
    """
    d at arc position s(theta): length of the inward normal up to the previous coil
    """
    return normal_crossing(spec, theta, root_tol=root_tol)[0]


def width_upper_bound(spec: SpiralSpec) -> float:
    """
    2pi*a0 + sup|rho(tau + 2pi) - rho(tau)|
    """
    return TWO_PI * spec.a0 + spec.rho.sup_period_jump()


def theta_of_radius(spec: SpiralSpec, radius: float, upper: Optional[float] = None) -> float:
    """
    Curve parameter where r(theta) = radius, for radius >= r(0)
    """
    r0 = radial_profile(spec, 0.0)[0]
    if radius <= r0:
        return 0.0
    hi = upper if upper is not None else (radius - r0) / spec.a0 + 1.0
    while radial_profile(spec, hi)[0] < radius:
        hi *= 2
    return float(brentq(lambda t: radial_profile(spec, t)[0] - radius, 0.0, hi))
