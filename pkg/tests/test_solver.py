import math
import numpy as np
import pytest

from oracle.constants import LOBPCG
from oracle.grid import build_grid, build_mask_grid
from oracle.solver import SpectrumResult, assemble_laplacian, lowest_eigenvalues, moment_sum, solve_grid
from utils.exceptions import SolverError

BESSEL_J0_ROOT_SQUARED = 2.404825557695773 ** 2


def unit_square(x, y):
    return (x > 0) & (x < 1) & (y > 0) & (y < 1)


def unit_disk(x, y):
    return x ** 2 + y ** 2 < 1


def square_grid(h):
    return build_mask_grid(unit_square, h=h, half_width=0.5, center=(0.5, 0.5))


def test_laplacian_is_symmetric():
    op = assemble_laplacian(square_grid(1 / 8))
    assert op.shape == (49, 49)
    assert abs(op - op.T).max() == 0
    assert op.diagonal() == pytest.approx(np.full(49, 4 * 64.0))


def test_square_ground_state():
    exact = 2 * math.pi ** 2
    coarse = lowest_eigenvalues(assemble_laplacian(square_grid(1 / 32)), k=1).eigenvalues[0]
    fine = lowest_eigenvalues(assemble_laplacian(square_grid(1 / 64)), k=1).eigenvalues[0]
    assert fine == pytest.approx(exact, rel=5e-3)
    assert fine < exact
    assert (4 * fine - coarse) / 3 == pytest.approx(exact, rel=5e-4)


def test_square_five_point_spectrum_is_exact():
    h = 1 / 64
    result = lowest_eigenvalues(assemble_laplacian(square_grid(h)), k=3)
    discrete = [
        4 / h ** 2 * (math.sin(m * math.pi * h / 2) ** 2 + math.sin(n * math.pi * h / 2) ** 2)
        for m, n in ((1, 1), (1, 2), (2, 1))
    ]
    assert result.eigenvalues == pytest.approx(sorted(discrete), rel=1e-9)
    assert np.all(result.residuals <= 1e-8)


def test_disk_ground_state():
    grid = build_mask_grid(unit_disk, h=1 / 128, half_width=1.0)
    value = lowest_eigenvalues(assemble_laplacian(grid), k=1).eigenvalues[0]
    assert value == pytest.approx(BESSEL_J0_ROOT_SQUARED, rel=0.01)


def test_lobpcg_agrees_with_shift_invert():
    op = assemble_laplacian(square_grid(1 / 16))
    lanczos = lowest_eigenvalues(op, k=3, tol=1e-6)
    block = lowest_eigenvalues(op, k=3, tol=1e-6, method=LOBPCG)
    assert block.eigenvalues == pytest.approx(lanczos.eigenvalues, rel=1e-6)


def test_solver_arguments():
    op = assemble_laplacian(square_grid(1 / 8))
    with pytest.raises(SolverError):
        lowest_eigenvalues(op, k=49)
    with pytest.raises(SolverError):
        lowest_eigenvalues(op, k=0)
    with pytest.raises(SolverError):
        lowest_eigenvalues(op, k=2, method="power_iteration")


def test_moment_sum():
    result = SpectrumResult(eigenvalues=np.array([1.0, 2.0, 3.0]), k_requested=3, residuals=np.zeros(3))
    assert moment_sum(result, 1.0, 2.5) == pytest.approx(2.0)
    assert moment_sum(result, 2.0, 2.5) == pytest.approx(1.5 ** 2 + 0.5 ** 2)
    assert moment_sum(result, 1.0, 0.5) == 0.0
    with pytest.raises(SolverError, match="not exhausted"):
        moment_sum(result, 1.0, 5.0)


def test_solve_grid_single_level():
    result = solve_grid(square_grid(1 / 32), threshold=30.0, sigmas=[1.0, 1.5])
    assert result.below_threshold().sum() == 1
    lowest = result.eigenvalues[0]
    assert result.moments[1.0] == pytest.approx(30.0 - lowest)
    assert result.moments[1.5] == pytest.approx((30.0 - lowest) ** 1.5)
    assert set(result.to_dict()) >= {"eigenvalues", "moments", "h", "threshold"}


def test_solve_grid_doubles_until_the_window_is_exhausted():
    # 13 eigenvalues pi^2 (m^2 + n^2) lie below 200
    result = solve_grid(square_grid(1 / 32), threshold=200.0, sigmas=[1.0], k=2)
    assert result.k_requested == 16
    assert result.below_threshold().sum() == 13
    assert result.eigenvalues[-1] >= 200.0


def test_absolute_residuals_below_one():
    # side 8: the three lowest eigenvalues lie below 1, where both residuals coincide
    grid = build_mask_grid(lambda x, y: (x > 0) & (x < 8) & (y > 0) & (y < 8), h=0.25, half_width=4.0, center=(4.0, 4.0))
    result = lowest_eigenvalues(assemble_laplacian(grid), k=3)
    assert np.all(result.eigenvalues < 1)
    assert np.all(result.absolute_residuals <= 1e-8)
    assert result.absolute_residuals == pytest.approx(result.residuals)


def test_absolute_residuals_scale_with_the_eigenvalue():
    result = lowest_eigenvalues(assemble_laplacian(square_grid(1 / 32)), k=2)
    assert result.absolute_residuals == pytest.approx(result.residuals * result.eigenvalues)
    assert len(result.to_dict()["absolute_residuals"]) == 2


@pytest.mark.slow
def test_eigenvalues_decrease_as_the_disk_grows(pure_spec):
    h = 1 / 8
    small = build_grid(pure_spec, h=h, R=4 * math.pi)
    large = build_grid(pure_spec, h=h, R=6 * math.pi)
    assert large.n_interior > small.n_interior
    inner = lowest_eigenvalues(assemble_laplacian(small), k=4).eigenvalues
    outer = lowest_eigenvalues(assemble_laplacian(large), k=4).eigenvalues
    assert outer[0] < inner[0]
    assert np.all(outer <= inner * (1 + 1e-6))
