"""
网格与空间算子
Spatio-temporal grid, banded difference/averaging operators and cross-grid interpolants.

State vectors hold interior nodes only (fixed ends): a subsystem with n
intervals carries n - 1 unknowns, and interval slopes (D_x- applied to a state)
have n entries.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import scipy.sparse as sp

from ..core.errors import GridError
from ..core.params import Boundary, StringParams

logger = logging.getLogger(__name__)

MIN_INTERVALS = 3
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    k: float
    h_t: float
    h_l: float
    n_t: int
    n_l: int

    @classmethod
    def from_counts(cls, sample_rate: float, n_t: int, n_l: int) -> "Grid":
        if min(n_t, n_l) < MIN_INTERVALS:
            raise GridError(f"grid needs at least {MIN_INTERVALS} intervals (got n_t={n_t}, n_l={n_l})")
        return cls(k=1.0 / sample_rate, h_t=1.0 / n_t, h_l=1.0 / n_l, n_t=n_t, n_l=n_l)

    @property
    def size(self) -> int:
        return (self.n_t - 1) + (self.n_l - 1)

    @property
    def n_u(self) -> int:
        return self.n_t - 1

    def nodes_t(self) -> np.ndarray:
        return np.arange(1, self.n_t) * self.h_t

    def nodes_l(self) -> np.ndarray:
        return np.arange(1, self.n_l) * self.h_l

    def to_dict(self) -> Dict[str, float]:
        return {"k": self.k, "h_t": self.h_t, "h_l": self.h_l, "n_t": self.n_t, "n_l": self.n_l}


def stability_margin(params: StringParams) -> float:
    """Smallest eigenvalue bound of the theta mass operator, 2*theta - 1."""
    return 2.0 * params.theta - 1.0


def min_spacing_t(params: StringParams, k: float) -> float:
    """
    横向最小网格间距
    Smallest transverse spacing h_t the theta scheme tolerates at time step k.

    Args:
        params: string parameters (gamma, kappa, theta are used)
        k: time step in seconds

    Returns:
        h_min solving (gamma k / h)^2 + 4 (kappa k)^2 / h^4 = 2 theta - 1
    """
    c = stability_margin(params)
    if c <= 0:
        raise GridError("theta = 1/2 leaves no stability margin for the transverse grid")
    g2 = (params.gamma * k) ** 2
    radicand = g2 * g2 + 16.0 * c * (params.kappa * k) ** 2
    return math.sqrt((g2 + math.sqrt(radicand)) / (2.0 * c))


def min_spacing_l(params: StringParams, k: float) -> float:
    """CFL limit of the explicit longitudinal wave, h_l >= gamma alpha k."""
    return params.gamma * params.alpha * k


def _count(h_min: float) -> int:
    return int(math.floor((1.0 / h_min) * (1.0 + SNAP_TOL)))


def compute_grid(params: StringParams, sample_rate: float) -> Grid:
    """
    计算稳定网格
    Coarsest-count grid whose spacings respect the stability bounds and divide the unit domain.

    Args:
        params: string parameters
        sample_rate: output rate, k = 1 / sample_rate

    Returns:
        Grid with n_t = floor(1 / h_t,min) and n_l = floor(1 / h_l,min)

    Raises:
        GridError: if either count falls below MIN_INTERVALS
    """
    if not sample_rate > 0:
        raise GridError(f"sample rate must be positive (got {sample_rate})")
    k = 1.0 / sample_rate
    n_t = _count(min_spacing_t(params, k))
    n_l = _count(min_spacing_l(params, k))
    if n_t < MIN_INTERVALS or n_l < MIN_INTERVALS:
        raise GridError(
            f"gamma={params.gamma:g} is too large for fs={sample_rate:g}: "
            f"n_t={n_t}, n_l={n_l} (need at least {MIN_INTERVALS})"
        )
    return Grid(k=k, h_t=1.0 / n_t, h_l=1.0 / n_l, n_t=n_t, n_l=n_l)


@dataclass
class GridReport:
    ratio_t: float
    ratio_l: float
    messages: List[str]

    @property
    def stable(self) -> bool:
        return not self.messages


def check_grid(grid: Grid, params: StringParams) -> GridReport:
    """Report grids finer than the stability bounds (ratios above 1 are unstable)."""
    k = grid.k
    c = stability_margin(params)
    lhs = (params.gamma * k / grid.h_t) ** 2 + 4.0 * (params.kappa * k) ** 2 / grid.h_t ** 4
    ratio_t = lhs / c if c > 0 else math.inf
    ratio_l = params.gamma * params.alpha * k / grid.h_l
    messages = []
    if ratio_t > 1.0 + SNAP_TOL:
        messages.append(
            f"transverse spacing h_t={grid.h_t:.6g} below the stable minimum "
            f"(stability ratio {ratio_t:.4f})"
        )
    if ratio_l > 1.0 + SNAP_TOL:
        messages.append(
            f"longitudinal spacing h_l={grid.h_l:.6g} below gamma*alpha*k={params.gamma * params.alpha * k:.6g}"
        )
    for message in messages:
        logger.warning(message)
    return GridReport(ratio_t=ratio_t, ratio_l=ratio_l, messages=messages)


@dataclass(frozen=True, eq=False)
class BandedMatrix:
    """Sparse operator with a handful of diagonals; CSR underneath."""

    matrix: sp.csr_matrix

    @classmethod
    def from_diagonals(cls, rows: int, cols: int, bands: Dict[int, Union[float, np.ndarray]]) -> "BandedMatrix":
        offsets = sorted(bands)
        diagonals = []
        for offset in offsets:
            length = min(rows, cols - offset) if offset >= 0 else min(rows + offset, cols)
            diagonals.append(np.array(np.broadcast_to(np.asarray(bands[offset], dtype=float), (length,))))
        return cls(sp.diags(diagonals, offsets, shape=(rows, cols), format="csr"))

    @classmethod
    def identity(cls, n: int) -> "BandedMatrix":
        return cls(sp.identity(n, format="csr"))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def offsets(self) -> List[int]:
        coo = self.matrix.tocoo()
        return sorted(set((coo.col - coo.row).tolist()))

    @property
    def bands(self) -> Dict[int, np.ndarray]:
        return {offset: self.matrix.diagonal(offset) for offset in self.offsets}

    def __matmul__(self, other):
        if isinstance(other, BandedMatrix):
            return BandedMatrix((self.matrix @ other.matrix).tocsr())
        return self.matrix @ other

    def __add__(self, other: "BandedMatrix") -> "BandedMatrix":
        return BandedMatrix((self.matrix + other.matrix).tocsr())

    def __sub__(self, other: "BandedMatrix") -> "BandedMatrix":
        return BandedMatrix((self.matrix - other.matrix).tocsr())

    def __rmul__(self, scalar: float) -> "BandedMatrix":
        return BandedMatrix((scalar * self.matrix).tocsr())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def apply(op: BandedMatrix, v: np.ndarray) -> np.ndarray:
    """
    算子作用于向量
    Matrix-vector product with a shape check.

    Args:
        op: banded operator of shape (rows, cols)
        v: vector (or column stack) with ``cols`` rows

    Returns:
        op @ v as a dense array

    Raises:
        ValueError: if the row count of ``v`` does not match ``op.cols``
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != op.cols:
        raise ValueError(f"dimension mismatch: operator is {op.rows}x{op.cols}, vector has {v.shape[0]} rows")
    return op.matrix @ v


@dataclass(frozen=True, eq=False)
class SubsystemOperators:
    n: int
    h: float
    d_xp: BandedMatrix
    d_xm: BandedMatrix
    d_xx: BandedMatrix
    d_xxxx: BandedMatrix
    m_xdot: BandedMatrix

    @property
    def identity(self) -> BandedMatrix:
        return BandedMatrix.identity(self.n - 1)


def build_subsystem(n: int, h: float, boundary: Boundary = Boundary.CLAMPED) -> SubsystemOperators:
    """
    构建单个子系统的差分算子
    Difference and averaging operators for one field with n intervals of width h.

    Args:
        n: interval count (n - 1 interior unknowns)
        h: spacing
        boundary: end condition, enters only the corners of D_xxxx

    Returns:
        SubsystemOperators with D_x+ (n-1 x n), D_x- (n x n-1), D_xx, D_xxxx and the
        neighbour average (all square ones n-1 x n-1)
    """
    d_xm = BandedMatrix.from_diagonals(n, n - 1, {0: 1.0 / h, -1: -1.0 / h})
    d_xp = BandedMatrix((-d_xm.matrix.T).tocsr())
    d_xx = d_xp @ d_xm
    d_xxxx = d_xx @ d_xx
    if boundary is Boundary.CLAMPED:
        # ghost node mirrored about the fixed end (zero slope)
        corner = np.zeros(n - 1)
        corner[0] = corner[-1] = 2.0 / h ** 4
        d_xxxx = d_xxxx + BandedMatrix(sp.diags(corner, format="csr"))
    m_xdot = BandedMatrix.from_diagonals(n - 1, n - 1, {-1: 0.5, 1: 0.5})
    return SubsystemOperators(n=n, h=h, d_xp=d_xp, d_xm=d_xm, d_xx=d_xx, d_xxxx=d_xxxx, m_xdot=m_xdot)


def lagrange_weights(s: float, start: int, order: int) -> np.ndarray:
    """Weights of the Lagrange polynomial through nodes start..start+order evaluated at s."""
    nodes = np.arange(start, start + order + 1, dtype=float)
    weights = np.ones(order + 1)
    for i in range(order + 1):
        for j in range(order + 1):
            if i != j:
                weights[i] *= (s - nodes[j]) / (nodes[i] - nodes[j])
    return weights


def _stencil(s: float, n_src: int, order: int):
    nearest = round(s)
    if abs(s - nearest) <= SNAP_TOL * max(1.0, abs(s)):
        s = float(nearest)
    start = int(math.floor(s)) - (order - 1) // 2
    start = min(max(start, 0), n_src - order - 1)
    return start, lagrange_weights(s, start, order)


def lagrange_interpolant(src: np.ndarray, dst: np.ndarray, order: int, zero_ends: bool = False) -> sp.csr_matrix:
    """
    拉格朗日插值矩阵
    Order-p Lagrange interpolation from a uniform source grid onto arbitrary points.

    Args:
        src: uniform source nodes, ends included
        dst: target points
        order: polynomial order p (p + 1 source nodes per row)
        zero_ends: treat the first and last source nodes as fixed zero boundary
            values and drop their columns

    Returns:
        sparse (len(dst), n_src or n_src - 2) matrix; a target that coincides with a
        source node gets a single unit weight
    """
    src = np.asarray(src, dtype=float)
    dst = np.atleast_1d(np.asarray(dst, dtype=float))
    n_src = len(src)
    if n_src < order + 1:
        raise GridError(f"interpolation order {order} needs {order + 1} source points, grid has {n_src}")
    spacing = src[1] - src[0]
    rows, cols, vals = [], [], []
    for row, x in enumerate(dst):
        start, weights = _stencil((x - src[0]) / spacing, n_src, order)
        for offset, w in enumerate(weights):
            col = start + offset
            if zero_ends:
                if col == 0 or col == n_src - 1:
                    continue
                col -= 1
            rows.append(row)
            cols.append(col)
            vals.append(w)
    n_cols = n_src - 2 if zero_ends else n_src
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(dst), n_cols))


@dataclass(frozen=True, eq=False)
class OperatorSet:
    grid: Grid
    order: int
    boundary: Boundary
    t: SubsystemOperators
    l: SubsystemOperators
    interp_l_to_t: sp.csr_matrix
    interp_t_to_l: sp.csr_matrix

    def read(self, x: float) -> np.ndarray:
        """I_p(x): interpolation weights on the transverse unknowns."""
        nodes = np.arange(self.grid.n_t + 1) * self.grid.h_t
        return lagrange_interpolant(nodes, [x], self.order, zero_ends=True).toarray()[0]

    def read_l(self, x: float) -> np.ndarray:
        nodes = np.arange(self.grid.n_l + 1) * self.grid.h_l
        return lagrange_interpolant(nodes, [x], self.order, zero_ends=True).toarray()[0]

    def spread(self, x: float) -> np.ndarray:
        """J_p(x) = I_p(x)^T / h_t."""
        return self.read(x) / self.grid.h_t


def build_operators(grid: Grid, interpolation_order: int = 3, boundary: Boundary = Boundary.CLAMPED) -> OperatorSet:
    """
    Both subsystems plus the cross-grid interpolants: longitudinal nodes onto
    transverse nodes, transverse midpoints onto longitudinal midpoints.
    """
    if interpolation_order < 1:
        raise GridError(f"interpolation order must be ≥ 1 (got {interpolation_order})")
    if min(grid.n_t, grid.n_l) < interpolation_order + 1:
        raise GridError(
            f"interpolation order {interpolation_order} is too high for "
            f"n_t={grid.n_t}, n_l={grid.n_l}"
        )
    t = build_subsystem(grid.n_t, grid.h_t, boundary)
    l = build_subsystem(grid.n_l, grid.h_l, boundary)
    nodes_l = np.arange(grid.n_l + 1) * grid.h_l
    mid_t = (np.arange(grid.n_t) + 0.5) * grid.h_t
    mid_l = (np.arange(grid.n_l) + 0.5) * grid.h_l
    return OperatorSet(
        grid=grid,
        order=interpolation_order,
        boundary=boundary,
        t=t,
        l=l,
        interp_l_to_t=lagrange_interpolant(nodes_l, grid.nodes_t(), interpolation_order, zero_ends=True),
        interp_t_to_l=lagrange_interpolant(mid_t, mid_l, interpolation_order),
    )


def dump_operator(op: Union[BandedMatrix, sp.spmatrix, np.ndarray], path: Union[str, Path], precision: Optional[int] = 17) -> Path:
    """Write an operator as a dense whitespace-delimited matrix."""
    if isinstance(op, BandedMatrix):
        dense = op.to_dense()
    elif sp.issparse(op):
        dense = op.toarray()
    else:
        dense = np.atleast_2d(np.asarray(op, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, dense, fmt=f"%.{precision}g")
    return path
