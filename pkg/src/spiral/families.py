import numpy as np
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Union

from utils.constants import TWO_PI
from utils.exceptions import GeometryError
from spiral.constants import BUMP_EXPONENT, BUMP_NORMALIZATION


ArrayLike = Union[float, np.ndarray]


class Perturbation(ABC):
    """
    The rho part of a radial profile r(theta) = a0 * theta + rho(theta)

    Families provide rho and its first two derivatives analytically for
    theta >= 0. Third and fourth derivatives are optional; when a family
    returns them, curvature derivatives are differentiated analytically
    instead of by finite differences.
    """

    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def value(self, theta: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    @abstractmethod
    def first(self, theta: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    @abstractmethod
    def second(self, theta: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def third(self, theta: ArrayLike) -> Optional[ArrayLike]:
        return None

    def fourth(self, theta: ArrayLike) -> Optional[ArrayLike]:
        return None

    @abstractmethod
    def sup_period_jump(self) -> float:
        """
        sup over tau >= 0 of |rho(tau + 2pi) - rho(tau)|
        """
        raise NotImplementedError

    @abstractmethod
    def min_slope(self) -> float:
        """
        inf over theta >= 0 of rho'(theta); the profile is monotone iff a0 + min_slope > 0
        """
        raise NotImplementedError

    @abstractmethod
    def scaled(self, factor: float) -> "Perturbation":
        """
        The perturbation of the spiral scaled by a homothety of ratio factor
        """
        raise NotImplementedError

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        raise NotImplementedError

    @property
    def width_decay_exponent(self) -> float:
        """
        Decay exponent q of 2*pi*a0 - d ~ theta^(-q); Archimedean tails give 2
        """
        return 2.0

    @property
    def archimedean_beyond(self) -> Optional[float]:
        """
        theta after which rho vanishes identically, None if it never does
        """
        return None

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.__class__.__name__}({args})"


class Pure(Perturbation):
    """
    rho = 0, the Archimedean spiral r = a0 * theta
    """

    def __init__(self):
        super().__init__(name="pure")

    def value(self, theta):
        return np.zeros_like(theta, dtype=float) if np.ndim(theta) else 0.0

    first = value
    second = value
    third = value
    fourth = value

    def sup_period_jump(self) -> float:
        return 0.0

    def min_slope(self) -> float:
        return 0.0

    def scaled(self, factor: float) -> "Pure":
        return Pure()

    def params(self) -> Dict[str, Any]:
        return {}

    @property
    def archimedean_beyond(self) -> Optional[float]:
        return 0.0


class PowerTail(Perturbation):
    """
    rho(theta) = c / (p - 1) * (1 + theta)^(1 - p), so that
    rho'(theta) = -c * (1 + theta)^(-p) with c > 0 and 1 < p < 2.

    rho is integrated from infinity, hence rho(0) = c / (p - 1) > 0 and the
    curve starts off the origin.
    """

    def __init__(self, c: float, p: float):
        super().__init__(name="power_tail")
        if not c > 0:
            raise GeometryError(f"power_tail needs c > 0, got {c}")
        if not 1 < p < 2:
            raise GeometryError(f"power_tail needs 1 < p < 2, got {p}")
        self.c = float(c)
        self.p = float(p)

    def value(self, theta):
        return self.c / (self.p - 1) * (1 + np.asarray(theta, dtype=float)) ** (1 - self.p)

    def first(self, theta):
        return -self.c * (1 + np.asarray(theta, dtype=float)) ** (-self.p)

    def second(self, theta):
        return self.c * self.p * (1 + np.asarray(theta, dtype=float)) ** (-self.p - 1)

    def third(self, theta):
        p = self.p
        return -self.c * p * (p + 1) * (1 + np.asarray(theta, dtype=float)) ** (-p - 2)

    def fourth(self, theta):
        p = self.p
        return self.c * p * (p + 1) * (p + 2) * (1 + np.asarray(theta, dtype=float)) ** (-p - 3)

    def sup_period_jump(self) -> float:
        # rho is decreasing and convex, the largest jump is at tau = 0
        return float(self.value(0.0) - self.value(TWO_PI))

    def min_slope(self) -> float:
        return -self.c

    def scaled(self, factor: float) -> "PowerTail":
        return PowerTail(c=self.c * factor, p=self.p)

    def params(self) -> Dict[str, Any]:
        return {"c": self.c, "p": self.p}

    @property
    def width_decay_exponent(self) -> float:
        return self.p


class Bump(Perturbation):
    """
    Local perturbation supported on [theta1, theta2]:

        rho(theta) = A * (4 t (1 - t))^5,  t = (theta - theta1) / (theta2 - theta1)

    The profile vanishes to fifth order at both ends, so rho is C^4 and the
    curvature keeps two continuous derivatives. A > 0 widens the coil lying
    over the support.
    """

    def __init__(self, amplitude: float, theta1: float, theta2: float):
        super().__init__(name="bump")
        if not 0 <= theta1 < theta2:
            raise GeometryError(
                f"bump needs 0 <= theta1 < theta2, got [{theta1}, {theta2}]"
            )
        self.amplitude = float(amplitude)
        self.theta1 = float(theta1)
        self.theta2 = float(theta2)
        self.length = self.theta2 - self.theta1

    def _local(self, theta):
        t = (np.asarray(theta, dtype=float) - self.theta1) / self.length
        inside = (t > 0) & (t < 1)
        t = np.where(inside, t, 0.0)
        return t, inside

    def value(self, theta):
        t, inside = self._local(theta)
        q = t * (1 - t)
        return self._finish(np.where(inside, BUMP_NORMALIZATION * q ** BUMP_EXPONENT, 0.0), 0)

    def first(self, theta):
        t, inside = self._local(theta)
        q, dq = t * (1 - t), 1 - 2 * t
        n = BUMP_EXPONENT
        b1 = BUMP_NORMALIZATION * n * q ** (n - 1) * dq
        return self._finish(np.where(inside, b1, 0.0), 1)

    def second(self, theta):
        t, inside = self._local(theta)
        q, dq = t * (1 - t), 1 - 2 * t
        n = BUMP_EXPONENT
        b2 = BUMP_NORMALIZATION * (
            n * (n - 1) * q ** (n - 2) * dq ** 2 - 2 * n * q ** (n - 1)
        )
        return self._finish(np.where(inside, b2, 0.0), 2)

    def _finish(self, profile, order: int):
        out = self.amplitude * profile / self.length ** order
        return float(out) if np.ndim(out) == 0 else out

    def sup_period_jump(self) -> float:
        # both values lie between 0 and A
        return abs(self.amplitude)

    def min_slope(self) -> float:
        # b' is antisymmetric about t = 1/2, so the steepest descent is -sup|rho'|
        t = np.linspace(0.0, 1.0, 4001)
        return -float(np.abs(self.first(self.theta1 + t * self.length)).max())

    def scaled(self, factor: float) -> "Bump":
        return Bump(amplitude=self.amplitude * factor, theta1=self.theta1, theta2=self.theta2)

    def params(self) -> Dict[str, Any]:
        return {"amplitude": self.amplitude, "theta1": self.theta1, "theta2": self.theta2}

    @property
    def archimedean_beyond(self) -> Optional[float]:
        return self.theta2


FAMILY2PERTURBATION = {
    "pure": Pure,
    "power_tail": PowerTail,
    "bump": Bump,
}


def make_perturbation(family: str, **params) -> Perturbation:
    if family not in FAMILY2PERTURBATION:
        raise GeometryError(
            f"unknown spiral family {family!r}, expected one of {sorted(FAMILY2PERTURBATION)}"
        )
    return FAMILY2PERTURBATION[family](**params)
