import math
import pytest

from spiral.families import Bump, PowerTail
from spiral.geometry import SpiralSpec
from spiral.window import find_s0


@pytest.fixture(scope="session")
def pure_spec():
    return SpiralSpec(a0=1.0)


@pytest.fixture(scope="session")
def pure_window(pure_spec):
    return find_s0(pure_spec, horizon=1e4)


@pytest.fixture(scope="session")
def wide_margin_window(pure_spec):
    # d * gamma <= 0.1 from theta ~ 63 on, where d is already close to 2 pi
    return find_s0(pure_spec, horizon=1e4, margin=0.9)


@pytest.fixture(scope="session")
def power_tail_spec():
    return SpiralSpec(a0=1.0, rho=PowerTail(c=0.5, p=1.5))


@pytest.fixture(scope="session")
def power_tail_window(power_tail_spec):
    return find_s0(power_tail_spec, horizon=5e5, margin=0.6)


@pytest.fixture(scope="session")
def bump_spec():
    return SpiralSpec(a0=1.0, rho=Bump(amplitude=0.5, theta1=30.0, theta2=30.0 + 2 * math.pi))


@pytest.fixture(scope="session")
def bump_window(bump_spec):
    return find_s0(bump_spec, horizon=1e4)
