import math
import numpy as np
import pytest

from spectral.potential import (
    curvature_in_s,
    effective_potential_table,
    effective_potential_theta,
    effective_potential_value,
    full_potential_value,
    potential_effective,
    potential_full,
    potential_sample,
    transverse_eigenvalue,
)
from spiral.geometry import invert_arc_length
from utils.exceptions import GeometryError


def test_full_potential_on_the_curve():
    assert full_potential_value(0.2, -0.01, 0.003, 0.0) == pytest.approx(0.01)


def test_full_potential_singular():
    with pytest.raises(GeometryError):
        full_potential_value(0.5, 0.0, 0.0, 2.0)
    with pytest.raises(GeometryError):
        effective_potential_value(0.5, 0.0, 0.0, 2.5)


def test_effective_potential_bounds_curvature_term():
    gamma, d = 0.1, 6.0
    value = effective_potential_value(gamma, 0.0, 0.0, d)
    assert value == pytest.approx(gamma ** 2 / (4 * (1 - gamma * d) ** 2))
    assert value > gamma ** 2 / 4


@pytest.mark.parametrize("name", ["pure_window", "power_tail_window", "bump_window"])
def test_effective_potential_dominates_full_potential(name, request):
    window = request.getfixturevalue(name)
    samples = window.samples
    rows = samples.iloc[np.linspace(0, len(samples) - 1, min(len(samples), 200)).astype(int)]
    for gamma, dgamma, ddgamma, d in rows[["gamma", "dgamma", "ddgamma", "d"]].itertuples(index=False):
        bound = effective_potential_value(gamma, dgamma, ddgamma, d)
        for u in np.linspace(0.0, d, 20):
            assert abs(full_potential_value(gamma, dgamma, ddgamma, u)) <= bound * (1 + 1e-12)


def test_potential_at_window_points(pure_window):
    row = pure_window.samples.iloc[10]
    table = effective_potential_table(pure_window)
    assert potential_effective(pure_window, row["s"]) == pytest.approx(table[10], rel=1e-7)
    sample = potential_sample(pure_window, row["s"], u=0.5 * row["d"])
    assert sample.W_eff == pytest.approx(table[10], rel=1e-7)
    assert abs(sample.W_full) <= sample.W_eff
    assert potential_full(pure_window, row["s"], 0.5 * row["d"]) == pytest.approx(sample.W_full)


def test_potential_full_rejects_points_outside_the_coil(pure_window):
    row = pure_window.samples.iloc[10]
    with pytest.raises(GeometryError):
        potential_full(pure_window, row["s"], 1.01 * row["d"])
    with pytest.raises(GeometryError):
        potential_full(pure_window, row["s"], -0.1)


def test_potential_below_s0_is_an_error(pure_window):
    with pytest.raises(GeometryError):
        potential_effective(pure_window, 0.5 * pure_window.s0)


def test_curvature_in_s(pure_window):
    row = pure_window.samples.iloc[15]
    data = curvature_in_s(pure_window, row["s"])
    assert data.gamma == pytest.approx(row["gamma"], rel=1e-8)
    assert data.dgamma == pytest.approx(row["dgamma"], rel=1e-6)


@pytest.mark.parametrize("s, limit", [(1e4, 0.12), (1e5, 0.05)])
def test_effective_potential_decays_like_inverse_arc_length(pure_spec, s, limit):
    theta = invert_arc_length(pure_spec, s)
    w_eff, _ = effective_potential_theta(pure_spec, theta)
    assert 0 < 8 * s * w_eff - 1 <= limit


def test_transverse_eigenvalues(pure_window):
    s = 5000.0
    first = transverse_eigenvalue(pure_window, s, 1)
    second = transverse_eigenvalue(pure_window, s, 2)
    # the curvature pulls the lowest level slightly below the threshold
    assert -1e-4 < first < 0
    assert second == pytest.approx(0.75, rel=0.01)
    with pytest.raises(GeometryError):
        transverse_eigenvalue(pure_window, s, 0)


def test_arc_length_derivatives_match_central_differences(pure_window):
    samples = pure_window.samples
    for i in (1, len(samples) // 2, len(samples) - 2):
        row = samples.iloc[i]
        step = 1e-3 * row["s"]
        ahead = curvature_in_s(pure_window, row["s"] + step)
        behind = curvature_in_s(pure_window, row["s"] - step)
        assert (ahead.gamma - behind.gamma) / (2 * step) == pytest.approx(row["dgamma"], rel=1e-4)
        assert (ahead.dgamma - behind.dgamma) / (2 * step) == pytest.approx(row["ddgamma"], rel=1e-3)
