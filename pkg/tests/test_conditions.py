import math
import numpy as np
import pytest

from spectral.conditions import (
    asymptotic_diagnostics,
    certificate_alpha,
    no_discrete_spectrum_certificate,
    tail_integrability,
    width_expansion,
)
from spectral.constants import CERTIFIED, DIAGNOSTIC_COLUMNS, INCONCLUSIVE, VIOLATED
from spectral.potential import effective_potential_theta
from spiral.geometry import coil_width
from utils.exceptions import CertificateError


@pytest.fixture(scope="module")
def pure_diagnostics(pure_window):
    return asymptotic_diagnostics(pure_window)


def test_alpha_tends_to_four_pi(wide_margin_window):
    assert certificate_alpha(wide_margin_window) == pytest.approx(4 * math.pi, rel=0.01)
    assert certificate_alpha(wide_margin_window) <= 4 * math.pi


def test_alpha_is_smaller_on_a_longer_window(pure_window, wide_margin_window):
    assert certificate_alpha(pure_window) < certificate_alpha(wide_margin_window)


def test_pure_spiral_is_marginal(pure_window):
    report = no_discrete_spectrum_certificate(pure_window)
    assert report.verdict == INCONCLUSIVE
    # the first line of the chain fails at order theta^-3 on the Archimedean tail
    assert report.worst_pointwise_margin < 0
    assert report.tail_relative_margin > -0.1
    assert report.width_decay_exponent == 2.0


def test_power_tail_is_certified(power_tail_window):
    report = no_discrete_spectrum_certificate(power_tail_window)
    assert report.verdict == CERTIFIED
    assert report.alpha == pytest.approx(12.32, rel=0.01)
    assert report.worst_margin > 0
    assert report.worst_pointwise_margin > 0
    assert report.width_decay_exponent == 1.5
    assert set(report.to_dict()) >= {"verdict", "alpha", "worst_margin", "worst_s"}


def test_widened_coil_is_violated(bump_window):
    report = no_discrete_spectrum_certificate(bump_window)
    assert report.verdict == VIOLATED
    assert report.worst_margin < 0
    assert 30.0 <= bump_window.theta_at(report.worst_s) <= 30.0 + 2 * math.pi


def test_tail_integrability_without_excess(pure_window):
    for sigma in (0.5, 1.5):
        result = tail_integrability(pure_window, sigma)
        assert result.finite
        assert result.tail_estimate == 0.0


def test_tail_integrability_of_a_local_excess(bump_window):
    low = tail_integrability(bump_window, 1.5)
    high = tail_integrability(bump_window, 2.0)
    assert low.finite and high.finite
    assert low.tail_estimate > 0
    # the excess stays below 1, so a larger power shrinks the integral
    assert high.tail_estimate <= low.tail_estimate


def test_tail_integrability_rejects_small_sigma(pure_window):
    with pytest.raises(CertificateError):
        tail_integrability(pure_window, 0.25)


def test_width_expansion_matches_coil_width(pure_spec):
    theta = 60.0
    four, fifth = width_expansion(1.0, theta)
    exact = (math.pi / coil_width(pure_spec, theta, root_tol=1e-14)) ** 2
    assert fifth == pytest.approx(math.pi * (4 * math.pi ** 2 - 1) / 2)
    assert abs(exact - four - fifth / theta ** 5) < abs(exact - four)
    assert abs(exact - four - fifth / theta ** 5) * theta ** 6 < 1e3


def test_diagnostics_table(pure_diagnostics):
    assert list(pure_diagnostics.columns) == DIAGNOSTIC_COLUMNS
    assert len(pure_diagnostics) == 50
    assert pure_diagnostics["theta"].iloc[0] == pytest.approx(10.0)
    assert pure_diagnostics["theta"].iloc[-1] == pytest.approx(100.0)


def test_expansion_remainder_has_no_growth(pure_diagnostics):
    scaled = pure_diagnostics["scaled_residual"].to_numpy()
    assert scaled[-1] / scaled[0] < 10
    assert scaled.max() < 1e3
    fifth = width_expansion(1.0, 100.0)[1]
    assert pure_diagnostics["fifth_order_estimate"].iloc[-1] == pytest.approx(fifth, rel=0.1)


def test_diagnostics_asymptotic_laws(pure_diagnostics, pure_window):
    theta = pure_diagnostics["theta"].to_numpy()
    assert np.all(np.abs(pure_diagnostics["curvature_residual"]) <= 3 / theta)
    assert np.all(np.abs(pure_diagnostics["arc_length_residual"]) <= 3 / theta)
    potential = pure_diagnostics["potential_residual"].to_numpy()
    assert np.all(np.isnan(potential[theta < pure_window.theta0]))
    assert 0 < potential[-1] < 0.2


def test_diagnostics_need_an_archimedean_tail(power_tail_window):
    with pytest.raises(CertificateError):
        asymptotic_diagnostics(power_tail_window)


def test_marginal_leading_orders_tie_far_out(pure_spec, wide_margin_window):
    # both sides of the certificate behave like pi / theta^2
    theta = 500.0
    alpha = certificate_alpha(wide_margin_window)
    gap = 2 * math.pi - coil_width(pure_spec, theta, root_tol=1e-14)
    w_eff, _ = effective_potential_theta(pure_spec, theta)
    assert gap * theta ** 2 == pytest.approx(math.pi, rel=0.1)
    assert alpha * w_eff * theta ** 2 == pytest.approx(math.pi, rel=0.1)
    assert alpha * w_eff / gap == pytest.approx(1.0, rel=0.1)
