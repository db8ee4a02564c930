import math
import numpy as np
import pytest

from spiral.constants import SAMPLE_COLUMNS
from spiral.geometry import arc_length, coil_width, curvature_chain, width_upper_bound
from spiral.window import find_s0, sample_row
from utils.exceptions import GeometryError


def test_pure_window_starts_after_the_first_coil(pure_window):
    assert 2 * math.pi < pure_window.theta0 < 7.0
    assert pure_window.s0 == pure_window.samples["s"].iloc[0]
    assert pure_window.horizon == pytest.approx(1e4, rel=1e-8)


def test_window_tables(pure_window):
    samples = pure_window.samples
    assert list(samples.columns) == SAMPLE_COLUMNS
    assert np.all(np.diff(samples["theta"]) > 0)
    assert np.all(np.diff(samples["s"]) > 0)
    assert np.all(samples["d"] * samples["gamma"] <= 0.9 + 1e-9)
    assert np.all(samples["d"] < 2 * math.pi)


def test_window_start_is_sharp(pure_window):
    gamma = curvature_chain(pure_window.spec, pure_window.theta0)[0]
    product = coil_width(pure_window.spec, pure_window.theta0) * gamma
    assert product == pytest.approx(0.9, abs=1e-6)


def test_window_arc_lengths(pure_window):
    row = pure_window.samples.iloc[20]
    assert row["s"] == pytest.approx(arc_length(pure_window.spec, row["theta"]), rel=1e-9)


def test_larger_margin_moves_s0_outwards(pure_spec, pure_window):
    window = find_s0(pure_spec, horizon=1e4, margin=0.3)
    assert 7.0 <= window.theta0 <= 10.5
    assert window.s0 > pure_window.s0


def test_theta_at(pure_window):
    row = pure_window.samples.iloc[30]
    assert pure_window.theta_at(row["s"]) == pytest.approx(row["theta"], rel=1e-9)
    assert pure_window.contains(row["s"])


def test_theta_at_rejects_points_below_s0(pure_window):
    with pytest.raises(GeometryError):
        pure_window.theta_at(0.5 * pure_window.s0)


def test_find_s0_needs_a_long_enough_horizon(pure_spec):
    with pytest.raises(GeometryError):
        find_s0(pure_spec, horizon=10.0)


def test_find_s0_validates_margin(pure_spec):
    with pytest.raises(GeometryError):
        find_s0(pure_spec, horizon=1e4, margin=1.5)


def test_find_s0_fails_when_the_horizon_is_not_admissible(pure_spec):
    # d * gamma is still ~0.2 at theta ~ 31
    with pytest.raises(GeometryError):
        find_s0(pure_spec, horizon=500.0, margin=0.9)


def test_widths_respect_upper_bound(bump_window):
    assert np.all(bump_window.samples["d"] <= width_upper_bound(bump_window.spec) * (1 + 1e-9))
    assert bump_window.samples["d"].max() > 2 * math.pi


def test_power_tail_window(power_tail_window):
    samples = power_tail_window.samples
    assert np.all(samples["d"] * samples["gamma"] <= 0.4 + 1e-9)
    assert power_tail_window.theta_horizon == pytest.approx(1000.0, rel=0.01)


def test_sample_row_matches_window(power_tail_window):
    row = power_tail_window.samples.iloc[-1]
    gamma, dgamma, ddgamma, d = sample_row(power_tail_window.spec, row["theta"])
    assert (gamma, dgamma, ddgamma, d) == pytest.approx(
        (row["gamma"], row["dgamma"], row["ddgamma"], row["d"]), rel=1e-12
    )
