import hashlib
import json
import math
import numpy as np
from typing import Any, Callable, Dict, Tuple, Union

from utils.constants import TWO_PI


ArrayLike = Union[float, np.ndarray]


def positive_part(x: ArrayLike) -> ArrayLike:
    """
    (x)_+ = max(x, 0), elementwise
    """
    return np.maximum(x, 0.0)


def wrap_angle(delta: float) -> float:
    """
    Map an angle difference into (-pi, pi]
    """
    return delta - TWO_PI * math.floor((delta + math.pi) / TWO_PI)


def richardson_derivatives(
    f: Callable[[float], float], x: float, h: float
) -> Tuple[float, float]:
    """
    First and second derivative of f at x from central differences with
    steps h and h/2, combined by one Richardson step (O(h^4) truncation)
    """
    f0 = f(x)
    fp1, fm1 = f(x + h), f(x - h)
    fp2, fm2 = f(x + h / 2), f(x - h / 2)

    d1_h = (fp1 - fm1) / (2 * h)
    d1_h2 = (fp2 - fm2) / h
    d2_h = (fp1 - 2 * f0 + fm1) / h ** 2
    d2_h2 = (fp2 - 2 * f0 + fm2) / (h / 2) ** 2

    return (4 * d1_h2 - d1_h) / 3, (4 * d2_h2 - d2_h) / 3


def geometric_grid(start: float, stop: float, ratio: float) -> np.ndarray:
    """
    start, start*ratio, start*ratio^2, ... with stop always included as last node
    """
    if start <= 0 or stop <= start or ratio <= 1:
        raise ValueError(f"bad geometric grid ({start}, {stop}, {ratio})")
    n = int(math.floor(math.log(stop / start) / math.log(ratio)))
    grid = start * ratio ** np.arange(n + 1)
    if stop - grid[-1] > 1e-9 * stop:
        grid = np.append(grid, stop)
    else:
        grid[-1] = stop
    return grid


def fit_power_law(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """
    Least-squares fit of y = C * x^(-k) in log-log coordinates, returns (C, k)
    """
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(np.exp(intercept)), float(-slope)


def config_hash(config: Dict[str, Any]) -> str:
    """
    Provenance hash of a configuration: sha256 of its canonical json
    """
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def with_neighbours(mask: np.ndarray) -> np.ndarray:
    """
    mask widened by one entry on each side
    """
    widened = mask.copy()
    widened[1:] |= mask[:-1]
    widened[:-1] |= mask[1:]
    return widened
