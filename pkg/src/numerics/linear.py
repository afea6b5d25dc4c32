"""
Direct solvers for the per-step block system A w = b.

The banded back-end reorders unknowns by spatial position so the coupled
transverse/longitudinal matrix becomes narrow-banded, then hands it to LAPACK.
A constant symmetric matrix is Cholesky-factored once; otherwise each step
gets a fresh LU solve. The sparse back-end uses SuperLU.
"""

import logging
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, solve_banded
from scipy.sparse.linalg import splu

from ..core.errors import SingularSystemError
from ..core.params import LinearSolver

logger = logging.getLogger(__name__)


def _condition_estimate(matrix: sp.csr_matrix) -> float:
    try:
        return float(np.linalg.cond(matrix.toarray()))
    except LinAlgError:
        return float("inf")


class Factorization:
    """Factored A of one step; failures re-raise as SingularSystemError with a condition estimate."""

    def __init__(self, matrix_fn, step: Optional[int]):
        self._matrix_fn = matrix_fn
        self.step = step

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _fail(self, exc: Exception):
        condition = _condition_estimate(self._matrix_fn())
        logger.error(f"linear solve failed at step {self.step}: {exc}")
        raise SingularSystemError(self.step, condition) from exc


class _CholeskyBanded(Factorization):
    def __init__(self, ab_upper: np.ndarray, perm: np.ndarray, matrix_fn, step):
        super().__init__(matrix_fn, step)
        self.perm = perm
        try:
            self.cb = cholesky_banded(ab_upper, lower=False, check_finite=False)
        except LinAlgError as e:
            self._fail(e)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs, dtype=float)
        out[self.perm] = cho_solve_banded((self.cb, False), rhs[self.perm], check_finite=False)
        return out


class _LUBanded(Factorization):
    def __init__(self, ab: np.ndarray, lower: int, upper: int, perm: np.ndarray, matrix_fn, step):
        super().__init__(matrix_fn, step)
        self.ab = ab
        self.lu = (lower, upper)
        self.perm = perm

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs, dtype=float)
        try:
            out[self.perm] = solve_banded(self.lu, self.ab, rhs[self.perm], check_finite=False)
        except (LinAlgError, ValueError) as e:
            self._fail(e)
        return out


class _SparseLU(Factorization):
    def __init__(self, matrix: sp.csr_matrix, step):
        super().__init__(lambda: matrix, step)
        try:
            self.lu = splu(matrix.tocsc())
        except RuntimeError as e:
            self._fail(e)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(np.asarray(rhs, dtype=float))


class LinearBackend:
    """
    Solver bound to one sparsity pattern.

    ``template`` fixes the CSR pattern (indptr/indices); matrices are passed
    to ``factorize`` as data arrays in that pattern. ``order`` lists the
    unknowns by position and drives the banded reordering.
    """

    def __init__(
        self,
        kind: LinearSolver,
        template: sp.csr_matrix,
        order: np.ndarray,
        constant: bool = False,
        symmetric: bool = False,
    ):
        self.kind = kind
        self.template = template.tocsr()
        self.template.sort_indices()
        self.size = template.shape[0]
        self.constant = constant
        self.symmetric = symmetric
        self._cached: Optional[Factorization] = None

        self.perm = np.asarray(order)
        inverse = np.empty_like(self.perm)
        inverse[self.perm] = np.arange(self.size)
        coo = self.template.tocoo()
        row_p = inverse[coo.row]
        col_p = inverse[coo.col]
        self.lower = int(max(0, (row_p - col_p).max(initial=0)))
        self.upper = int(max(0, (col_p - row_p).max(initial=0)))
        self._ab_shape = (self.lower + self.upper + 1, self.size)
        self._ab_index = (self.upper + row_p - col_p) * self.size + col_p

    @property
    def bandwidth(self):
        return self.lower, self.upper

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.template.indices, self.template.indptr), shape=self.template.shape)

    def banded(self, data: np.ndarray) -> np.ndarray:
        """LAPACK band storage of the position-ordered matrix: ab[upper + i - j, j] = A[i, j]."""
        ab =np.zeros(self._ab_shape)
        ab.flat[self._ab_index] = data
        return ab

    def factorize(self, data: np.ndarray, step: Optional[int] = None) -> Factorization:
        """
        分解系统矩阵
        Factor the matrix whose CSR values in the template pattern are ``data``.

        Args:
            data: values aligned with ``template.indices``
            step: time index, carried into SingularSystemError

        Returns:
            Factorization whose ``solve`` accepts a vector or a column stack;
            a constant backend returns the first factorization on every call

        Raises:
            SingularSystemError: if LAPACK or SuperLU reject the matrix
        """
        if self.constant and self._cached is not None:
            return self._cached
        factor = self._factorize(data, step)
        if self.constant:
            self._cached = factor
        return factor

    def _factorize(self, data: np.ndarray, step: Optional[int]) -> Factorization:
        def matrix_fn():
            return self.matrix(data)

        if self.kind is LinearSolver.DIRECT_SPARSE:
            return _SparseLU(self.matrix(data), step)
        ab = self.banded(data)
        if self.constant and self.symmetric:
            return _CholeskyBanded(ab[: self.upper + 1], self.perm, matrix_fn, step)
        return _LUBanded(ab, self.lower, self.upper, self.perm, matrix_fn, step)
