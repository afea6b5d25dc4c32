"""
Pointwise reference for the explicit (theta = 1) linear lossless transverse update:

    u+_l = 2 u_l - u-_l + (gamma k / h)^2 (u_{l+1} - 2 u_l + u_{l-1})
           - (kappa k / h^2)^2 (u_{l+2} - 4 u_{l+1} + 6 u_l - 4 u_{l-1} + u_{l-2})

with u_0 = u_N = 0 and the ghost node u_{-1} = u_1 (clamped) or -u_1 (simply supported).

``theta_reference`` covers the implicit theta scheme with losses by a dense
solve over operators filled entry by entry.
"""

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ..core.params import Boundary


def _ghost_sign(boundary: Boundary) -> float:
    return 1.0 if boundary is Boundary.CLAMPED else -1.0


def stencil_reference(
    u0: np.ndarray,
    u1: np.ndarray,
    n_steps: int,
    gamma: float,
    kappa: float,
    k: float,
    h: float,
    boundary: Boundary = Boundary.CLAMPED,
) -> np.ndarray:
    """Interior states u^0 .. u^(n_steps + 1), one row per time level."""
    n = len(u0) + 1
    lam2 = (gamma * k / h) ** 2
    mu2 = (kappa * k / h ** 2) ** 2
    ghost = _ghost_sign(boundary)
    history = np.zeros((n_steps + 2, n - 1))
    history[0], history[1] = u0, u1
    # padded[j] holds u_{j-1}: two ghost nodes at each end
    padded = np.zeros(n + 3)
    for step in range(1, n_steps + 1):
        u, u_prev = history[step], history[step - 1]
        padded[2:n + 1] = u
        padded[0] = ghost * u[0]
        padded[n + 2] = ghost * u[-1]
        for l in range(1, n):
            j = l + 1
            second = padded[j + 1] - 2.0 * padded[j] + padded[j - 1]
            fourth = padded[j + 2] - 4.0 * padded[j + 1] + 6.0 * padded[j] - 4.0 * padded[j - 1] + padded[j - 2]
            history[step + 1, l - 1] = 2.0 * u[l - 1] - u_prev[l - 1] + lam2 * second - mu2 * fourth
    return history


def _entrywise_operators(n: int, h: float, boundary: Boundary):
    """Dense D_xx, D_xxxx and the neighbour average on the n - 1 interior nodes, filled stencil by stencil."""
    size = n - 1
    ghost = _ghost_sign(boundary)
    d2 = np.zeros((size, size))
    d4 = np.zeros((size, size))
    average = np.zeros((size, size))
    second = {-1: 1.0, 0: -2.0, 1: 1.0}
    fourth = {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0}
    for row in range(size):
        for offset, weight in second.items():
            col = row + offset
            if 0 <= col < size:
                d2[row, col] += weight / h ** 2
                if offset:
                    average[row, col] += 0.5
        for offset, weight in fourth.items():
            col = row + offset
            if 0 <= col < size:
                d4[row, col] += weight / h ** 4
            elif col in (-2, size + 1):
                # ghost beyond the fixed end mirrors the first interior node
                mirror = 0 if col < 0 else size - 1
                d4[row, mirror] += ghost * weight / h ** 4
    return d2, d4, average


def theta_reference(
    u0: np.ndarray,
    u1: np.ndarray,
    n_steps: int,
    gamma: float,
    kappa: float,
    theta: float,
    k: float,
    h: float,
    sigma0: float = 0.0,
    sigma1: float = 0.0,
    boundary: Boundary = Boundary.CLAMPED,
) -> np.ndarray:
    """
    隐式 θ 格式参考解
    Linear transverse theta-scheme solved densely from entrywise operators:

        (theta I + (1 - theta) mu) (u+ - 2u + u-) = k^2 (gamma^2 D2 - kappa^2 D4) u
            - 2 sigma0 k (u+ - u-) + 2 sigma1 k D2 (u+ - u-)

    where mu averages the two neighbours. Returns u^0 .. u^(n_steps + 1).
    """
    n = len(u0) + 1
    d2, d4, average = _entrywise_operators(n, h, boundary)
    eye = np.eye(n - 1)
    mass = theta * eye + (1.0 - theta) * average
    loss = 2.0 * sigma0 * k * eye - 2.0 * sigma1 * k * d2
    lhs = lu_factor(mass + loss)
    stiffness = -2.0 * mass - (gamma * k) ** 2 * d2 + (kappa * k) ** 2 * d4
    history = np.zeros((n_steps + 2, n - 1))
    history[0], history[1] = u0, u1
    for step in range(1, n_steps + 1):
        rhs = -(stiffness @ history[step] + (mass - loss) @ history[step - 1])
        history[step + 1] = lu_solve(lhs, rhs)
    return history
