"""
Hammer: lumped mass striking the string through a one-sided power-law felt.

Per step the contact force F solves

    F = omega^(1+alpha) * ([e0 - sigma F]^+)^alpha

where e0 - sigma F is the time-averaged compression once the string response
(through I A^-1 J) and the hammer's own update u_H+ = 2 u_H - u_H- - k^2 F
are substituted. The right-hand side is non-increasing in F, so the root is
unique and lies in [0, e0 / sigma].
"""

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .specs import HammerSpec
from ..core.errors import ConvergenceError
from ..core.params import SolverSettings


@dataclass
class HammerState:
    """Hammer displacement at the two latest levels and the force of the last step."""

    u_h_prev: float
    u_h_curr: float
    last_force: float = 0.0

    @classmethod
    def launch(cls, spec: HammerSpec, k: float) -> "HammerState":
        return cls(u_h_prev=spec.u_h0, u_h_curr=spec.u_h0 + k * spec.v_h0)

    def advance(self, force: float, k: float) -> "HammerState":
        u_next = 2.0 * self.u_h_curr - self.u_h_prev - k ** 2 * force
        return replace(self, u_h_prev=self.u_h_curr, u_h_curr=u_next, last_force=force)


def contact_force(compression: float, omega_h: float, alpha_h: float) -> float:
    """omega_h^(1 + alpha_h) * [compression]^+ ^ alpha_h; zero when apart."""
    if compression <= 0.0:
        return 0.0
    return omega_h ** (1.0 + alpha_h) * compression ** alpha_h


def solve_hammer(
    e0: float,
    sigma: float,
    omega_h: float,
    alpha_h: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    step: int = -1,
) -> Tuple[float, int, float]:
    """
    求解击弦接触力
    Root of F = omega^(1+alpha) ([e0 - sigma F]^+)^alpha by safeguarded Newton.

    Args:
        e0: compression without this step's force
        sigma: compression lost per unit force, > 0
        omega_h, alpha_h: felt stiffness and exponent
        tol: relative step tolerance on F
        max_iter: Newton iteration cap
        step: time index for ConvergenceError

    Returns:
        (force, iterations, residual); force is 0 with no iterations when e0 <= 0

    Raises:
        ConvergenceError: if the iteration cap is reached
    """
    if e0 <= 0.0:
        return 0.0, 0, 0.0
    stiffness = omega_h ** (1.0 + alpha_h)
    lo, hi = 0.0, e0 / sigma
    force = min(contact_force(e0, omega_h, alpha_h), 0.5 * hi)
    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        compression = e0 - sigma * force
        residual = force - stiffness * compression ** alpha_h
        if residual > 0:
            hi = force
        else:
            lo = force
        derivative = 1.0 + stiffness * alpha_h * sigma * compression ** (alpha_h - 1.0)
        candidate = force - residual / derivative
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - force) <= tol * max(candidate, 1e-300):
            return candidate, iteration, abs(residual)
        force = candidate
    raise ConvergenceError(step, "hammer", abs(residual), max_iter)


def hammer_terms(
    hstate: HammerState, y_base: float, y_prev: float, response: float, spec: HammerSpec, k: float
) -> Tuple[float, float]:
    """(e0, sigma) of the contact equation from the string readout without this hammer's force."""
    eta_prev = hstate.u_h_prev - y_prev
    e0 = 0.5 * (2.0 * hstate.u_h_curr - hstate.u_h_prev - y_base + eta_prev)
    sigma = 0.5 * k ** 2 * (1.0 + spec.mass_ratio * response)
    return e0, sigma


def hammer_couple(state, system, spec: HammerSpec, hstate: Optional[HammerState], solver: SolverSettings):
    """
    Couple one hammer to the step described by ``system``.

    Returns the excitation term Gamma_H (full state length), the advanced
    hammer state and the iteration count.
    """
    asm = system.assembler
    ops = system.operators
    k = asm.k
    hstate = hstate or HammerState.launch(spec, k)
    reader = ops.read(spec.x_h)
    spread = np.zeros(asm.size)
    spread[: asm.n_u] = reader / ops.grid.h_t

    columns = system.solve(np.column_stack([system.rhs(state.w_curr, state.w_prev), spread]))
    w_free, g = columns[:, 0], columns[:, 1]
    y_base = reader @ w_free[: asm.n_u]
    y_prev = reader @ state.w_prev[: asm.n_u]
    e0, sigma = hammer_terms(hstate, y_base, y_prev, reader @ g[: asm.n_u], spec, k)
    force, iterations, _ = solve_hammer(
        e0, sigma, spec.omega_h, spec.alpha_h, solver.newton_tol, solver.newton_max_iter, state.step
    )
    gamma = -(k ** 2) * spec.mass_ratio * force * spread
    return gamma, hstate.advance(force, k), iterations


def separation(hstate: HammerState, y_curr: float) -> float:
    """Signed contact distance u_H - I u (positive means compression)."""
    return hstate.u_h_curr - y_curr
