import logging
import math
import numpy as np
from dataclasses import dataclass
from scipy.spatial import cKDTree
from typing import Callable, Optional, Tuple

from oracle.constants import (
    CURVE_SEGMENT_FRACTION,
    DIRICHLET_CURVE,
    DIRICHLET_OUTER,
    INTERIOR,
    MIN_CROSS_SECTION_NODES,
    RESOLUTION_FACTOR,
)
from spiral.geometry import SpiralSpec, radial_profile, theta_of_radius
from utils.constants import TWO_PI
from utils.exceptions import GeometryError


@dataclass(frozen=True, eq=False)
class GridDomain:
    """
    Square lattice x = center + h * i, |i| <= n, with a status per node

    :param status: np.ndarray
        int8 codes INTERIOR / DIRICHLET_CURVE / DIRICHLET_OUTER, indexed [ix, iy]
    :param index: np.ndarray
        unknown number of each interior node, -1 elsewhere
    :param distance: np.ndarray
        distance of each node to the curve, inf where it was not needed;
        None for grids built from a mask
    """

    h: float
    R: float
    center: Tuple[float, float]
    status: np.ndarray
    index: np.ndarray
    distance: Optional[np.ndarray] = None

    @property
    def n_interior(self) -> int:
        return int((self.status == INTERIOR).sum())

    @property
    def shape(self) -> Tuple[int, int]:
        return self.status.shape

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        half = (self.status.shape[0] - 1) // 2
        offsets = self.h * np.arange(-half, half + 1)
        return self.center[0] + offsets, self.center[1] + offsets


def _finish(h: float, R: float, center: Tuple[float, float], status: np.ndarray, distance=None) -> GridDomain:
    status[0, :] = status[-1, :] = DIRICHLET_OUTER
    status[:, 0] = status[:, -1] = DIRICHLET_OUTER
    index = np.full(status.shape, -1, dtype=np.int64)
    interior = status == INTERIOR
    index[interior] = np.arange(int(interior.sum()))
    return GridDomain(h=h, R=R, center=center, status=status, index=index, distance=distance)


def build_mask_grid(
    inside: Callable[[np.ndarray, np.ndarray], np.ndarray],
    h: float,
    half_width: float,
    center: Tuple[float, float] = (0.0, 0.0),
) -> GridDomain:
    """
    Grid on the square of the given half width around center; nodes where
    inside(x, y) is true are interior, all others Dirichlet
    """
    half = int(round(half_width / h))
    offsets = h * np.arange(-half, half + 1)
    x, y = np.meshgrid(center[0] + offsets, center[1] + offsets, indexing="ij")
    status = np.where(inside(x, y), INTERIOR, DIRICHLET_OUTER).astype(np.int8)
    return _finish(h, half_width, center, status)


def _curve_polyline(spec: SpiralSpec, theta_max: float, h: float) -> np.ndarray:
    coarse = np.linspace(0.0, theta_max, 1001)
    r = spec.a0 * coarse + spec.rho.value(coarse)
    rdot = spec.a0 + spec.rho.first(coarse)
    top_speed = 1.1 * float(np.max(np.hypot(r, rdot)))
    n = int(math.ceil(theta_max * top_speed / (CURVE_SEGMENT_FRACTION * h))) + 1
    return spec.curve(np.linspace(0.0, theta_max, n))


def distance_to_polyline(points: np.ndarray, polyline: np.ndarray, cutoff: float) -> np.ndarray:
    """
    Distance of each point to the polyline, inf beyond cutoff

    The nearest vertex comes from a KD-tree; the distance is then refined by
    projecting onto the two segments adjacent to that vertex.
    """
    tree = cKDTree(polyline)
    dist, idx = tree.query(points, distance_upper_bound=cutoff)
    out = np.full(len(points), np.inf)
    near = np.isfinite(dist)
    p, i, best = points[near], idx[near], dist[near]
    for offset in (-1, 0):
        start = np.clip(i + offset, 0, len(polyline) - 2)
        a, b = polyline[start], polyline[start + 1]
        ab = b - a
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(p - (a + t[:, None] * ab), axis=1))
    out[near] = best
    return out


def _check_resolution(status: np.ndarray):
    half = (status.shape[0] - 1) // 2
    rays = {
        "+x": status[half:, half],
        "-x": status[half::-1, half],
        "+y": status[half, half:],
        "-y": status[half, half::-1],
    }
    for name, ray in rays.items():
        run, opened = 0, False
        for code in ray:
            if code == INTERIOR:
                run += 1
                continue
            if code == DIRICHLET_CURVE and opened and 0 < run < MIN_CROSS_SECTION_NODES:
                raise GeometryError(
                    f"coil unresolved: {run} interior nodes across a coil on the {name} axis, "
                    f"need {MIN_CROSS_SECTION_NODES}"
                )
            if code == DIRICHLET_OUTER:
                break
            opened, run = code == DIRICHLET_CURVE, 0


def build_grid(spec: SpiralSpec, h: float, R: float) -> GridDomain:
    """
    Five-point grid on the disk of radius R with the spiral as Dirichlet slit

    Nodes within h/2 of the curve or at radius >= R are Dirichlet nodes.
    """
    if not h > 0 or not R > 0:
        raise GeometryError(f"grid needs positive h and R, got h={h}, R={R}")
    if h > spec.a0 / RESOLUTION_FACTOR:
        raise GeometryError(f"h={h} does not resolve the coil, need h <= a0/{RESOLUTION_FACTOR}")
    first_coil = radial_profile(spec, TWO_PI)[0]
    if R < first_coil:
        raise GeometryError(f"R={R} is smaller than the first coil radius {first_coil:.6g}")

    half = int(math.floor(R / h)) + 1
    offsets = h * np.arange(-half, half + 1)
    x, y = np.meshgrid(offsets, offsets, indexing="ij")
    radius = np.hypot(x, y)
    inside = radius < R

    polyline = _curve_polyline(spec, theta_of_radius(spec, R + h), h)
    distance = np.full(x.shape, np.inf)
    points = np.column_stack([x[inside], y[inside]])
    distance[inside] = distance_to_polyline(points, polyline, cutoff=h)

    status = np.full(x.shape, DIRICHLET_OUTER, dtype=np.int8)
    status[inside] = INTERIOR
    status[inside & (distance <= h / 2)] = DIRICHLET_CURVE
    _check_resolution(status)

    grid = _finish(h, R, (0.0, 0.0), status, distance)
    logging.info(
        f"grid h={h:g} R={R:.6g}: {grid.n_interior} interior nodes, "
        f"{int((status == DIRICHLET_CURVE).sum())} on the curve"
    )
    return grid
