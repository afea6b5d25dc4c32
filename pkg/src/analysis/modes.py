"""
模态分析
Reference mode tables: the closed-form stiff-string modes and the exact modes of the discrete scheme.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.linalg import eigh

from ..core.params import SimulationConfig
from ..numerics.grid_ops import build_subsystem, compute_grid


@dataclass(frozen=True)
class ModeTable:
    f0: float
    kappa: float
    gamma: float
    K: float
    modes: np.ndarray

    def __len__(self) -> int:
        return len(self.modes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f0": self.f0,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "K": self.K,
            "modes": [float(f) for f in self.modes],
        }


def inharmonicity(f0: float, kappa: float) -> float:
    return (math.pi * kappa / (2.0 * f0)) ** 2


def fletcher_modes(f0: float, kappa: float, count: int = 10) -> ModeTable:
    """Partials of a lossless stiff string with clamped ends, p = 0 .. count-1."""
    if not f0 > 0:
        raise ValueError(f"f0 must be > 0 (got {f0})")
    if count < 1:
        raise ValueError(f"mode count must be ≥ 1 (got {count})")
    gamma = 2.0 * f0
    K = (math.pi * kappa / gamma) ** 2
    n = np.arange(1, count + 1, dtype=float)
    scale = 1.0 + (2.0 / math.pi) * math.sqrt(K) + (4.0 / math.pi ** 2) * K
    modes = f0 * n * scale * np.sqrt(1.0 + K * n ** 2)
    return ModeTable(f0=f0, kappa=kappa, gamma=gamma, K=K, modes=modes)


def scheme_modes(config: SimulationConfig, count: Optional[int] = None) -> ModeTable:
    """
    Lossless linear transverse modes of the discrete theta scheme on the config's grid.

    Solves (S - G) v = mu Theta v; each mu maps to f = (fs / pi) asin(sqrt(mu) / 2).
    """
    s = config.string
    grid = compute_grid(s, config.sample_rate)
    ops = build_subsystem(grid.n_t, grid.h_t, config.boundary)
    k = grid.k
    theta = s.theta * np.eye(grid.n_t - 1) + (1.0 - s.theta) * ops.m_xdot.to_dense()
    stiffness = (s.kappa * k) ** 2 * ops.d_xxxx.to_dense() - (s.gamma * k) ** 2 * ops.d_xx.to_dense()
    mu = eigh(stiffness, theta, eigvals_only=True)
    mu = np.clip(mu, 0.0, 4.0)
    freqs = (config.sample_rate / math.pi) * np.arcsin(np.sqrt(mu) / 2.0)
    if count is not None:
        freqs = freqs[:count]
    f0 = s.fundamental_frequency()
    return ModeTable(f0=f0, kappa=s.kappa, gamma=s.gamma, K=inharmonicity(f0, s.kappa), modes=freqs)


@dataclass
class ModeMatch:
    matched: int
    total: int
    tolerance: float
    peaks: List[Optional[float]]
    relative_errors: List[Optional[float]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "matched": self.matched,
            "total": self.total,
            "tolerance": self.tolerance,
            "peaks": self.peaks,
            "relative_errors": self.relative_errors,
        }


def match_modes(peak_frequencies: np.ndarray, modes: ModeTable, tolerance: float = 0.01) -> ModeMatch:
    """For every reference mode, the nearest detected peak and whether it lies within ``tolerance`` (relative)."""
    peaks = np.asarray(peak_frequencies, dtype=float)
    nearest: List[Optional[float]] = []
    errors: List[Optional[float]] = []
    matched = 0
    for f in modes.modes:
        if peaks.size == 0:
            nearest.append(None)
            errors.append(None)
            continue
        candidate = float(peaks[np.argmin(np.abs(peaks - f))])
        error = abs(candidate - f) / f
        nearest.append(candidate)
        errors.append(error)
        matched += int(error <= tolerance)
    return ModeMatch(matched, len(modes), tolerance, nearest, errors)
