"""
分块系统组装
Block system A w+ + B w + C w- + Gamma = 0 for the coupled transverse/longitudinal string.

Only the slope-dependent blocks change from step to step; they are stored as
fixed-pattern matrices whose values are a linear map of the slope vector
(or its square), so per-step assembly is a pair of sparse mat-vecs.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .grid_ops import OperatorSet
from .linear import Factorization, LinearBackend
from ..core.params import LinearSolver, StringParams


class LambdaLinearBlock:
    """X(lam) = L diag(lam) R on the fixed pattern of |L| |R|; values = coef @ lam."""

    def __init__(self, left: sp.spmatrix, right: sp.spmatrix):
        left = sp.csc_matrix(left)
        right = sp.csr_matrix(right)
        self.shape = (left.shape[0], right.shape[1])
        rows, cols, mids, vals = [], [], [], []
        for m in range(left.shape[1]):
            l_rows = left.indices[left.indptr[m]:left.indptr[m + 1]]
            l_vals = left.data[left.indptr[m]:left.indptr[m + 1]]
            r_cols = right.indices[right.indptr[m]:right.indptr[m + 1]]
            r_vals = right.data[right.indptr[m]:right.indptr[m + 1]]
            if not len(l_rows) or not len(r_cols):
                continue
            rows.append(np.repeat(l_rows, len(r_cols)))
            cols.append(np.tile(r_cols, len(l_rows)))
            vals.append(np.outer(l_vals, r_vals).ravel())
            mids.append(np.full(len(l_rows) * len(r_cols), m))
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        keys = rows * self.shape[1] + cols
        unique, inverse = np.unique(keys, return_inverse=True)
        self.rows = unique // self.shape[1]
        self.cols = unique % self.shape[1]
        self.coef = sp.csr_matrix(
            (np.concatenate(vals), (inverse, np.concatenate(mids))),
            shape=(len(unique), left.shape[1]),
        )

    def values(self, lam: np.ndarray) -> np.ndarray:
        return self.coef @ lam

    def matrix(self, lam: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((self.values(lam), (self.rows, self.cols)), shape=self.shape)


def _position_order(ops: OperatorSet) -> np.ndarray:
    positions = np.concatenate([ops.grid.nodes_t(), ops.grid.nodes_l()])
    return np.argsort(positions, kind="stable")


class SchemeAssembler:
    """Precomputed constant blocks of the scheme for one (operators, parameters) pair."""

    def __init__(self, ops: OperatorSet, params: StringParams, linear_solver: LinearSolver = LinearSolver.DIRECT_BANDED):
        self.ops = ops
        self.params = params
        grid = ops.grid
        k = grid.k
        t, l = ops.t, ops.l
        self.n_u = grid.n_t - 1
        self.n_z = grid.n_l - 1
        self.size = self.n_u + self.n_z
        self.k = k

        eye_t = sp.identity(self.n_u, format="csr")
        eye_l = sp.identity(self.n_z, format="csr")
        g2k2 = (params.gamma * k) ** 2
        self.theta_op = (params.theta * eye_t + (1.0 - params.theta) * t.m_xdot.matrix).tocsr()
        self.g_t = (g2k2 * t.d_xx.matrix).tocsr()
        self.s_t = ((params.kappa * k) ** 2 * t.d_xxxx.matrix).tocsr()
        self.g_l = (g2k2 * l.d_xx.matrix).tocsr()

        loss_t = 2.0 * params.sigma0_t * k * eye_t - 2.0 * params.sigma1_t * k * t.d_xx.matrix
        loss_l = 2.0 * params.sigma0_l * k * eye_l - 2.0 * params.sigma1_l * k * l.d_xx.matrix
        self.q_plus_t = (self.theta_op + loss_t).tocsr()
        self.q_minus_t = (self.theta_op - loss_t).tocsr()
        self.q_plus_l = (eye_l + loss_l).tocsr()
        self.q_minus_l = (eye_l - loss_l).tocsr()
        self.b_tt = (-2.0 * self.theta_op - self.g_t + self.s_t).tocsr()
        self.b_ll = (-2.0 * eye_l - params.alpha ** 2 * self.g_l).tocsr()

        self.phi2 = g2k2 * (params.alpha ** 2 - 1.0) / 4.0
        self.d_xm = t.d_xm.matrix
        self.d_xp = t.d_xp.matrix
        self.slope_l_to_t = (self.d_xm @ ops.interp_l_to_t).tocsr()
        self.spread_t_to_l = (l.d_xp.matrix @ ops.interp_t_to_l).tocsr()

        linear_a = sp.block_diag([self.q_plus_t, self.q_plus_l], format="coo")
        linear_c = sp.block_diag([self.q_minus_t, self.q_minus_l], format="coo")
        blocks = [(linear_a.row, linear_a.col), (linear_c.row, linear_c.col)]
        if self.nonlinear:
            self._v = LambdaLinearBlock(self.d_xp, self.d_xm)
            self._k_tl = LambdaLinearBlock(self.d_xp, self.slope_l_to_t)
            self._k_lt = LambdaLinearBlock(self.spread_t_to_l, self.d_xm)
            blocks += [
                (self._v.rows, self._v.cols),
                (self._k_tl.rows, self._k_tl.cols + self.n_u),
                (self._k_lt.rows + self.n_u, self._k_lt.cols),
            ]

        m = self.size
        keys = np.unique(np.concatenate([r * m + c for r, c in blocks]))
        rows = keys // m
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=m))])
        self.pattern = sp.csr_matrix((np.zeros(len(keys)), keys % m, indptr), shape=(m, m))
        self._keys = keys

        self.a_const = self._scatter(linear_a.row, linear_a.col, linear_a.data)
        self.c_const = self._scatter(linear_c.row, linear_c.col, linear_c.data)
        if self.nonlinear:
            self.p_lam = -self.phi2 * (
                self._select(self._k_tl.rows, self._k_tl.cols + self.n_u) @ self._k_tl.coef
                + self._select(self._k_lt.rows + self.n_u, self._k_lt.cols) @ self._k_lt.coef
            ).tocsr()
            self.p_lam2 = (-self.phi2 * (self._select(self._v.rows, self._v.cols) @ self._v.coef)).tocsr()

        self.backend = LinearBackend(
            linear_solver,
            self.pattern,
            _position_order(ops),
            constant=not self.nonlinear,
            symmetric=not self.nonlinear,
        )

    @property
    def nonlinear(self) -> bool:
        return self.phi2 != 0.0

    def _positions(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return np.searchsorted(self._keys, rows * self.size + cols)

    def _scatter(self, rows, cols, data) -> np.ndarray:
        out = np.zeros(len(self._keys))
        np.add.at(out, self._positions(rows, cols), data)
        return out

    def _select(self, rows, cols) -> sp.csr_matrix:
        positions = self._positions(rows, cols)
        return sp.csr_matrix(
            (np.ones(len(positions)), (positions, np.arange(len(positions)))),
            shape=(len(self._keys), len(positions)),
        )

    def split(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return w[: self.n_u], w[self.n_u:]

    def slopes(self, u: np.ndarray) -> np.ndarray:
        return self.d_xm @ u

    def a_values(self, lam: np.ndarray) -> np.ndarray:
        """Pattern values of A: constant part plus terms linear and quadratic in the slopes."""
        if not self.nonlinear:
            return self.a_const
        return self.a_const + self.p_lam @ lam + self.p_lam2 @ (lam * lam)

    def assemble(self, w_curr: np.ndarray, step: Optional[int] = None) -> "BlockSystem":
        """
        组装当前步的分块系统
        Build A(lambda^n) from the transverse slopes of the current level.

        Args:
            w_curr: current state [u; zeta]
            step: time index, used only in error reports

        Returns:
            BlockSystem holding lambda^n and the values of A in the shared pattern
        """
        lam = self.slopes(w_curr[: self.n_u])
        return BlockSystem(self, lam, self.a_values(lam), step)

    def rhs(self, w_curr: np.ndarray, w_prev: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """-(B w_curr + C w_prev), excitation excluded."""
        u, z = self.split(w_curr)
        u_prev, z_prev = self.split(w_prev)
        r_u = self.b_tt @ u + self.q_minus_t @ u_prev
        r_z = self.b_ll @ z + self.q_minus_l @ z_prev
        if self.nonlinear:
            slope_prev = self.d_xm @ u_prev
            coupled = self.slope_l_to_t @ (2.0 * z + z_prev)
            r_u -= self.phi2 * (self.d_xp @ (lam * coupled + lam * lam * slope_prev))
            r_z -= self.phi2 * (self.spread_t_to_l @ (lam * slope_prev))
        return -np.concatenate([r_u, r_z])

    def linear_energy(self, u_next: np.ndarray, u_curr: np.ndarray) -> float:
        """
        Conserved quantity of the lossless linear transverse scheme between two time levels.

        Non-increasing once losses are present.
        """
        h = self.ops.grid.h_t
        diff = u_next - u_curr
        stiffness = self.s_t - self.g_t
        kinetic = diff @ (self.theta_op @ diff)
        potential = u_next @ (stiffness @ u_curr)
        return 0.5 * h * (kinetic + potential) / self.k ** 2


@dataclass(eq=False)
class BlockSystem:
    """One step's A with lazily built B, C and coupling blocks for inspection and dumps."""

    assembler: SchemeAssembler
    lambda_n: np.ndarray
    a_data: np.ndarray
    step: Optional[int] = None

    @property
    def phi2(self) -> float:
        return self.assembler.phi2

    @property
    def operators(self) -> OperatorSet:
        return self.assembler.ops

    @cached_property
    def A(self) -> sp.csr_matrix:
        return self.assembler.backend.matrix(self.a_data)

    @cached_property
    def C(self) -> sp.csr_matrix:
        asm = self.assembler
        return asm.backend.matrix(self.a_data - asm.a_const + asm.c_const)

    @cached_property
    def B(self) -> sp.csr_matrix:
        asm = self.assembler
        coupling = None
        if asm.nonlinear:
            coupling = 2.0 * self.k_tl
        return sp.bmat([[asm.b_tt, coupling], [None, asm.b_ll]], format="csr")

    @cached_property
    def k_tl(self) -> sp.csr_matrix:
        asm = self.assembler
        if not asm.nonlinear:
            return sp.csr_matrix((asm.n_u, asm.n_z))
        return (-asm.phi2 * asm._k_tl.matrix(self.lambda_n)).tocsr()

    @cached_property
    def k_lt(self) -> sp.csr_matrix:
        asm = self.assembler
        if not asm.nonlinear:
            return sp.csr_matrix((asm.n_z, asm.n_u))
        return (-asm.phi2 * asm._k_lt.matrix(self.lambda_n)).tocsr()

    @cached_property
    def v_t(self) -> sp.csr_matrix:
        asm = self.assembler
        if not asm.nonlinear:
            return sp.csr_matrix((asm.n_u, asm.n_u))
        return (-asm.phi2 * asm._v.matrix(self.lambda_n ** 2)).tocsr()

    @cached_property
    def factorization(self) -> Factorization:
        return self.assembler.backend.factorize(self.a_data, self.step)

    def rhs(self, w_curr: np.ndarray, w_prev: np.ndarray) -> np.ndarray:
        return self.assembler.rhs(w_curr, w_prev, self.lambda_n)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.factorization.solve(b)


def assemble(w_curr: np.ndarray, ops: OperatorSet, params: StringParams, step: Optional[int] = None) -> BlockSystem:
    """One-off assembly; engines keep a SchemeAssembler and call its ``assemble``."""
    return SchemeAssembler(ops, params).assemble(w_curr, step)
