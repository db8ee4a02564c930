import logging
import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass, field
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh, lobpcg
from typing import Dict, Iterable, List, Optional

from oracle.constants import (
    DEFAULT_EIGENVALUES,
    LOBPCG,
    MAX_EIGENVALUES,
    MAX_SOLVER_ITERATIONS,
    SHIFT_INVERT,
    SOLVER_METHODS,
)
from oracle.grid import GridDomain
from utils.constants import DEFAULT_SEED, SOLVER_TOL
from utils.exceptions import SolverError
from utils.utils import positive_part


@dataclass
class SpectrumResult:
    """
    Lowest eigenvalues of the grid Laplacian, ascending, with their residuals
    ||A v - lambda v|| / (||v|| max(1, |lambda|))
    """

    eigenvalues: np.ndarray
    k_requested: int
    residuals: np.ndarray
    h: Optional[float] = None
    R: Optional[float] = None
    threshold: Optional[float] = None
    moments: Dict[float, float] = field(default_factory=dict)
    vectors: Optional[np.ndarray] = field(default=None, repr=False)

    def below_threshold(self) -> np.ndarray:
        if self.threshold is None:
            return np.zeros(len(self.eigenvalues), dtype=bool)
        return self.eigenvalues < self.threshold

    @property
    def absolute_residuals(self) -> np.ndarray:
        """
        ||A v - lambda v|| / ||v||, equal to the residuals for lambda <= 1
        """
        return np.asarray(self.residuals) * np.maximum(1.0, np.abs(self.eigenvalues))

    def to_dict(self) -> Dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "k_requested": self.k_requested,
            "residuals": [float(r) for r in self.residuals],
            "absolute_residuals": [float(r) for r in self.absolute_residuals],
            "h": self.h,
            "R": self.R,
            "threshold": self.threshold,
            "moments": {str(sigma): value for sigma, value in self.moments.items()},
        }


def assemble_laplacian(grid: GridDomain) -> sp.csr_matrix:
    """
    Five-point Dirichlet Laplacian (4 u_ij - sum of neighbours) / h^2 on the interior nodes
    """
    index = grid.index
    n = grid.n_interior
    scale = 1.0 / grid.h ** 2
    rows: List[np.ndarray] = [np.arange(n)]
    cols: List[np.ndarray] = [np.arange(n)]
    data: List[np.ndarray] = [np.full(n, 4.0 * scale)]
    for left, right in (
        (index[:-1, :], index[1:, :]),
        (index[:, :-1], index[:, 1:]),
    ):
        both = (left >= 0) & (right >= 0)
        a, b = left[both], right[both]
        rows += [a, b]
        cols += [b, a]
        data += [np.full(len(a), -scale)] * 2
    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return matrix.tocsr()


def _residuals(op: sp.spmatrix, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    defect = op @ vectors - vectors * values
    return np.linalg.norm(defect, axis=0) / (
        np.linalg.norm(vectors, axis=0) * np.maximum(1.0, np.abs(values))
    )


def lowest_eigenvalues(
    op: sp.spmatrix,
    k: int,
    tol: float = SOLVER_TOL,
    seed: int = DEFAULT_SEED,
    method: str = SHIFT_INVERT,
    maxiter: int = MAX_SOLVER_ITERATIONS,
) -> SpectrumResult:
    """
    k smallest eigenpairs of a symmetric positive definite operator

    "shift_invert" runs Lanczos on (A - 0)^-1 with a sparse factorization,
    "lobpcg" runs the block method with a Jacobi preconditioner. Both start
    from a seeded random block; pairs are accepted on their residual only.
    """
    if k < 1:
        raise SolverError(f"k must be >= 1, got {k}")
    if method not in SOLVER_METHODS:
        raise SolverError(f"unknown eigensolver {method!r}, expected one of {SOLVER_METHODS}")
    n = op.shape[0]
    if k >= n:
        raise SolverError(f"k={k} eigenpairs requested from an operator of size {n}")
    rng = np.random.default_rng(seed)

    if method == SHIFT_INVERT:
        # residuals in A are ||A|| times those of the inverse: run to machine precision
        try:
            values, vectors = eigsh(
                op.tocsc(), k=k, sigma=0.0, which="LM", v0=rng.standard_normal(n),
                tol=0.0, maxiter=maxiter,
            )
        except ArpackNoConvergence as error:
            residuals = _residuals(op, error.eigenvalues, error.eigenvectors) if len(error.eigenvalues) else []
            raise SolverError(f"shift-invert Lanczos did not converge for k={k}", residuals) from error
        except ArpackError as error:
            raise SolverError(f"shift-invert Lanczos failed: {error}") from error
    else:
        preconditioner = sp.diags(1.0 / op.diagonal())
        values, vectors = lobpcg(
            op, rng.standard_normal((n, k)), M=preconditioner, tol=tol,
            maxiter=maxiter, largest=False,
        )

    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    residuals = _residuals(op, values, vectors)
    if np.any(residuals > tol):
        raise SolverError(f"{method} eigenpairs rejected, residual above {tol:g}", np.sort(residuals))
    logging.info(f"{method}: {k} eigenpairs, lowest {values[0]:.10g}, max residual {residuals.max():.3e}")
    return SpectrumResult(eigenvalues=values, k_requested=k, residuals=residuals, vectors=vectors)


def moment_sum(result: SpectrumResult, sigma: float, threshold: float) -> float:
    """
    sum_k (Lambda - lambda_k)_+^sigma, once an eigenvalue >= Lambda has been computed
    """
    if len(result.eigenvalues) and result.eigenvalues[-1] < threshold:
        raise SolverError(
            f"spectral window not exhausted: largest computed eigenvalue "
            f"{result.eigenvalues[-1]:.10g} < {threshold:.10g}"
        )
    return float(np.sum(positive_part(threshold - np.asarray(result.eigenvalues)) ** sigma))


def solve_grid(
    grid: GridDomain,
    threshold: float,
    sigmas: Iterable[float],
    k: int = DEFAULT_EIGENVALUES,
    tol: float = SOLVER_TOL,
    seed: int = DEFAULT_SEED,
    method: str = SHIFT_INVERT,
) -> SpectrumResult:
    """
    Eigenvalues of the grid Laplacian until one lies above the threshold, then
    the moment sums for every sigma; k is doubled while the window is not exhausted
    """
    op = assemble_laplacian(grid)
    while True:
        result = lowest_eigenvalues(op, min(k, op.shape[0] - 1), tol=tol, seed=seed, method=method)
        if result.eigenvalues[-1] >= threshold:
            break
        if k >= MAX_EIGENVALUES or k >= op.shape[0] - 1:
            raise SolverError(
                f"spectral window not exhausted with {k} eigenvalues, all below {threshold:.10g}"
            )
        k *= 2
        logging.info(f"window not exhausted, retrying with k={k}")
    result.h, result.R, result.threshold = grid.h, grid.R, threshold
    result.moments = {float(sigma): moment_sum(result, sigma, threshold) for sigma in sigmas}
    logging.info(
        f"{int(result.below_threshold().sum())} eigenvalues below {threshold:.6g}; "
        + ", ".join(f"sigma={s:g}: {m:.6g}" for s, m in result.moments.items())
    )
    return result
