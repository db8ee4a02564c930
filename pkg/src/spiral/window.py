import logging
import math
import numpy as np
import pandas as pd
from dataclasses import dataclass
from tqdm.auto import tqdm
from typing import Optional, Tuple

from spiral.constants import EXTRAPOLATION_ROWS, SAMPLE_COLUMNS, WIDTH_BOUND_SLACK
from spiral.geometry import (
    SpiralSpec,
    arc_length,
    coil_width,
    curvature_chain,
    invert_arc_length,
    width_upper_bound,
)
from utils.constants import (
    DEFAULT_MARGIN,
    QUAD_REL_TOL,
    ROOT_TOL,
    THETA_MIN,
    THETA_RATIO,
)
from utils.exceptions import GeometryError
from utils.utils import fit_power_law, geometric_grid


@dataclass(frozen=True, eq=False)
class GeometryWindow:
    """
    The admissible Fermi region s >= s0 of a spiral, with sampled tables

    :param samples: pd.DataFrame
        rows (theta, s, gamma, dgamma, ddgamma, d), strictly increasing in
        theta and s, first row at s0 and last row at the horizon; gamma and its
        derivatives are taken with respect to arc length
    """

    spec: SpiralSpec
    s0: float
    horizon: float
    margin: float
    samples: pd.DataFrame

    @property
    def a0(self) -> float:
        return self.spec.a0

    @property
    def theta0(self) -> float:
        return float(self.samples["theta"].iloc[0])

    @property
    def theta_horizon(self) -> float:
        return float(self.samples["theta"].iloc[-1])

    def contains(self, s: float) -> bool:
        return self.s0 <= s <= self.horizon

    def theta_at(self, s: float) -> float:
        """
        theta(s) for s >= s0, inverted from the nearest tabulated sample
        """
        if s < self.s0 * (1 - 1e-14):
            raise GeometryError(
                f"s={s} lies below s0={self.s0}: Fermi coordinates are not used there"
            )
        s_col = self.samples["s"].to_numpy()
        idx = max(int(np.searchsorted(s_col, s, side="right")) - 1, 0)
        return invert_arc_length(
            self.spec,
            max(s, self.s0),
            theta_hint=float(self.samples["theta"].iloc[idx]),
            s_hint=float(s_col[idx]),
        )


def sample_row(
    spec: SpiralSpec, theta: float, root_tol: float = ROOT_TOL, method: str = "auto"
) -> Tuple[float, float, float, float]:
    """
    gamma, d gamma/ds, d^2 gamma/ds^2 and d at theta
    """
    gamma, dgamma, ddgamma = curvature_chain(spec, theta, method=method)
    d = coil_width(spec, theta, root_tol=root_tol)
    return gamma, dgamma, ddgamma, d


def _width_curvature(spec: SpiralSpec, theta: float, root_tol: float) -> float:
    """
    d * gamma at theta, NaN where the coil width cannot be measured
    """
    try:
        gamma, _, _, d = sample_row(spec, theta, root_tol=root_tol)
    except GeometryError as error:
        logging.debug(f"no coil width at theta={theta:.6g}: {error}")
        return math.nan
    return d * gamma


def _refine_start(
    spec: SpiralSpec, bad: float, good: float, bound: float, root_tol: float
) -> float:
    # NaN counts as a violation; returns the admissible end of the bracket
    while good - bad > 1e-10 * good:
        mid = 0.5 * (bad + good)
        value = _width_curvature(spec, mid, root_tol)
        if value <= bound:
            good = mid
        else:
            bad = mid
    return good


def _log_extrapolation(window: GeometryWindow):
    tail = window.samples.tail(EXTRAPOLATION_ROWS)
    product = (tail["d"] * tail["gamma"]).to_numpy()
    if len(tail) < 3 or np.any(product <= 0):
        logging.warning("d*gamma tail not positive, beyond-horizon check skipped")
        return
    coef, k = fit_power_law(tail["s"].to_numpy(), product)
    limit = 1 - window.margin
    message = (
        f"d*gamma ~ {coef:.6g} * s^(-{k:.4g}) on the last {len(tail)} samples "
        f"(expected exponent 0.5)"
    )
    if k <= 0:
        logging.warning(message + f"; not decaying, validity beyond s={window.horizon:.6g} is not supported")
    elif coef * window.horizon ** (-k) > limit:
        logging.warning(message + f"; extrapolation exceeds {limit:.4g} beyond the horizon")
    else:
        logging.info(message)


def find_s0(
    spec: SpiralSpec,
    horizon: float,
    margin: float = DEFAULT_MARGIN,
    ratio: float = THETA_RATIO,
    root_tol: float = ROOT_TOL,
    quad_rel_tol: float = QUAD_REL_TOL,
    method: str = "auto",
    theta_horizon: Optional[float] = None,
) -> GeometryWindow:
    """
    Smallest s0 with d(s) * gamma(s) <= 1 - margin at every sample of [s0, horizon]

    Samples lie on a geometric grid in theta starting at 2pi with the given
    ratio; the start is refined by bisection between the last violating
    sample and its successor.

    :param horizon: float
        largest arc length S_max covered by the tables
    :param theta_horizon: float
        theta(horizon) when already known, skips one inversion
    """
    if not horizon > 0:
        raise GeometryError(f"horizon must be positive, got {horizon}")
    if not 0 < margin < 1:
        raise GeometryError(f"margin must lie in (0, 1), got {margin}")

    if theta_horizon is None:
        theta_horizon = invert_arc_length(spec, horizon)
    if theta_horizon <= THETA_MIN * ratio:
        raise GeometryError(
            f"horizon s={horizon:.6g} does not reach past the second coil (theta={theta_horizon:.6g})"
        )
    thetas = geometric_grid(THETA_MIN, theta_horizon, ratio)

    bound = 1 - margin
    rows = []
    for theta in tqdm(thetas, desc="sampling", leave=False):
        try:
            rows.append(sample_row(spec, theta, root_tol=root_tol, method=method))
        except GeometryError as error:
            logging.debug(f"sample at theta={theta:.6g} rejected: {error}")
            rows.append((math.nan,) * 4)
    table = np.array(rows, dtype=float)
    product = table[:, 3] * table[:, 0]
    admissible = product <= bound

    if not admissible[-1]:
        raise GeometryError(
            f"no s0 below horizon {horizon:.6g}: d*gamma = {product[-1]:.6g} > {bound:.6g} at the horizon"
        )
    violating = np.flatnonzero(~admissible)
    if violating.size:
        last = int(violating[-1])
        theta_star = _refine_start(spec, thetas[last], thetas[last + 1], bound, root_tol)
        thetas = np.concatenate([[theta_star], thetas[last + 1:]])
        table = np.vstack([sample_row(spec, theta_star, root_tol=root_tol, method=method), table[last + 1:]])
        if theta_star == thetas[1]:
            thetas, table = thetas[1:], table[1:]

    s_values = np.empty_like(thetas)
    s_values[0] = arc_length(spec, thetas[0], rel_tol=quad_rel_tol)
    for i in range(1, len(thetas)):
        s_values[i] = s_values[i - 1] + arc_length(
            spec, thetas[i], start=thetas[i - 1], rel_tol=quad_rel_tol
        )

    samples = pd.DataFrame(
        np.column_stack([thetas, s_values, table]), columns=SAMPLE_COLUMNS
    )

    upper = width_upper_bound(spec)
    if (samples["d"] <= 0).any():
        raise GeometryError("nonpositive coil width sampled")
    excess = samples["d"] - upper
    if (excess > WIDTH_BOUND_SLACK * upper).any():
        worst = int(excess.to_numpy().argmax())
        raise GeometryError(
            f"coil width {samples['d'].iloc[worst]:.12g} exceeds 2pi*a0 + sup jump = {upper:.12g} "
            f"at theta={samples['theta'].iloc[worst]:.6g}"
        )

    window = GeometryWindow(
        spec=spec,
        s0=float(s_values[0]),
        horizon=float(s_values[-1]),
        margin=margin,
        samples=samples,
    )
    logging.info(
        f"{spec.family}: s0={window.s0:.10g} (theta0={window.theta0:.8g}), "
        f"horizon={window.horizon:.10g}, {len(samples)} samples"
    )
    _log_extrapolation(window)
    return window
