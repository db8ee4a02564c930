import math
import numpy as np
from dataclasses import dataclass
from typing import Optional, Tuple

from spiral.geometry import SpiralSpec, curvature_chain
from spiral.window import GeometryWindow, sample_row
from utils.exceptions import GeometryError


@dataclass(frozen=True)
class CurvatureData:
    """
    Curvature and its first two arc-length derivatives at s
    """

    s: float
    gamma: float
    dgamma: float
    ddgamma: float


@dataclass(frozen=True)
class PotentialSample:
    s: float
    u: Optional[float]
    W_full: Optional[float]
    W_eff: float


def full_potential_value(gamma: float, dgamma: float, ddgamma: float, u: float) -> float:
    """
    W(s, u) = gamma^2 / (4(1 - u gamma)^2) + u gamma'' / (2(1 - u gamma)^3)
              + 5/4 u^2 gamma'^2 / (1 - u gamma)^4
    """
    gap = 1.0 - u * gamma
    if gap <= 0:
        raise GeometryError(f"singular potential: u*gamma = {u * gamma:.6g} >= 1")
    return (
        gamma ** 2 / (4 * gap ** 2)
        + u * ddgamma / (2 * gap ** 3)
        + 1.25 * u ** 2 * dgamma ** 2 / gap ** 4
    )


def effective_potential_value(gamma: float, dgamma: float, ddgamma: float, d: float) -> float:
    """
    W~(s) = gamma^2 / (4(1 - gamma d)^2) + d |gamma''| / (2(1 - gamma d)^3)
            + 5/4 d^2 |gamma'|^2 / (1 - d gamma)^4
    """
    gap = 1.0 - d * gamma
    if gap <= 0:
        raise GeometryError(f"singular effective potential: d*gamma = {d * gamma:.6g} >= 1")
    return (
        gamma ** 2 / (4 * gap ** 2)
        + d * abs(ddgamma) / (2 * gap ** 3)
        + 1.25 * d ** 2 * abs(dgamma) ** 2 / gap ** 4
    )


def effective_potential_theta(spec: SpiralSpec, theta: float) -> Tuple[float, float]:
    """
    (W~, d) at the curve point theta, without going through the arc length
    """
    gamma, dgamma, ddgamma, d = sample_row(spec, theta)
    return effective_potential_value(gamma, dgamma, ddgamma, d), d


def effective_potential_table(window: GeometryWindow) -> np.ndarray:
    """
    W~ at every row of the window's sample table
    """
    columns = window.samples[["gamma", "dgamma", "ddgamma", "d"]]
    return np.array([
        effective_potential_value(gamma, dgamma, ddgamma, d)
        for gamma, dgamma, ddgamma, d in columns.itertuples(index=False)
    ])


def curvature_in_s(window: GeometryWindow, s: float) -> CurvatureData:
    theta = window.theta_at(s)
    gamma, dgamma, ddgamma = curvature_chain(window.spec, theta)
    return CurvatureData(s=s, gamma=gamma, dgamma=dgamma, ddgamma=ddgamma)


def potential_full(window: GeometryWindow, s: float, u: float) -> float:
    """
    Curvature-induced potential W(s, u) across the coil, 0 <= u <= d(s)
    """
    theta = window.theta_at(s)
    gamma, dgamma, ddgamma, d = sample_row(window.spec, theta)
    if u < 0 or u > d * (1 + 1e-12):
        raise GeometryError(f"u={u} outside the cross-section [0, d={d:.12g}] at s={s}")
    return full_potential_value(gamma, dgamma, ddgamma, u)


def potential_effective(window: GeometryWindow, s: float) -> float:
    theta = window.theta_at(s)
    return effective_potential_theta(window.spec, theta)[0]


def potential_sample(window: GeometryWindow, s: float, u: Optional[float] = None) -> PotentialSample:
    theta = window.theta_at(s)
    gamma, dgamma, ddgamma, d = sample_row(window.spec, theta)
    w_eff = effective_potential_value(gamma, dgamma, ddgamma, d)
    w_full = None if u is None else full_potential_value(gamma, dgamma, ddgamma, u)
    return PotentialSample(s=s, u=u, W_full=w_full, W_eff=w_eff)


def transverse_value(d: float, w_eff: float, a0: float, j: int) -> float:
    return (math.pi * j / d) ** 2 - w_eff - 1 / (4 * a0 ** 2)


def transverse_eigenvalue(window: GeometryWindow, s: float, j: int) -> float:
    """
    j-th eigenvalue (pi j / d)^2 - W~(s) - 1/(4 a0^2) of the transverse
    operator on (0, d(s)) with Dirichlet ends, shifted by the threshold
    """
    if j < 1:
        raise GeometryError(f"mode index must be >= 1, got {j}")
    w_eff, d = effective_potential_theta(window.spec, window.theta_at(s))
    return transverse_value(d, w_eff, window.a0, j)
