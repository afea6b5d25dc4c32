"""
拨弦初始条件
Pluck: a raised-cosine displacement released from rest.
"""

from typing import Tuple

import numpy as np

from .specs import PluckSpec
from ..numerics.grid_ops import Grid


def raised_cosine(x: np.ndarray, center: float, width: float) -> np.ndarray:
    """Unit-peak raised cosine of total support ``width`` centred at ``center``, zero outside."""
    distance = np.abs(x - center)
    shape = 0.5 * (1.0 + np.cos(2.0 * np.pi * (x - center) / width))
    return np.where(distance < width / 2.0, shape, 0.0)


def pluck_init(spec: PluckSpec, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    拨弦初始状态
    Initial state for a pluck released from rest.

    Args:
        spec: amplitude c0, position x_p and width
        grid: target grid

    Returns:
        (w0, w1) with w0 == w1, zero longitudinal part and a sampled peak of exactly c0;
        a support narrower than one cell puts c0 on the nearest node
    """
    shape = raised_cosine(grid.nodes_t(), spec.x_p, spec.width)
    peak = shape.max()
    if peak > 0:
        shape = shape / peak
    else:
        # support narrower than one grid cell
        shape[int(np.argmin(np.abs(grid.nodes_t() - spec.x_p)))] = 1.0
    u = spec.c0 * shape
    w = np.concatenate([u, np.zeros(grid.n_l - 1)])
    return w, w.copy()
