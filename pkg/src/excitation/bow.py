"""
弓弦摩擦模型
Bow friction: exponential characteristic curve and the per-step stick/slip solve.

With the free (unforced) next state and the response g = A^-1 J of the string
to a unit spread at the bow, the relative velocity obeys the scalar equation

    v = b - c * phi(v),   b = I (w_free - u_prev) / 2k - v_B,   c = k F_B (I g) / 2

which is solved here. phi has a jump at v = 0; a root on either slip side is
bracketed and found by Newton with bisection, and the bow sticks (v = 0) when
|b| <= c. The previous step's branch is preferred when several exist.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .specs import BowSpec
from ..core.errors import ConvergenceError
from ..core.params import SolverSettings


def friction_curve(v_rel, a: float, eps: float):
    """
    摩擦特性曲线
    sign(v) * (eps + (1 - eps) * exp(-a |v|)), with sign(0) = 0.

    Args:
        v_rel: relative velocity, scalar or array
        a: sharpness, >= 0
        eps: sliding floor in [0, 1]

    Returns:
        float for a scalar input, otherwise an array of the same shape
    """
    v = np.asarray(v_rel, dtype=float)
    out = np.sign(v) * (eps + (1.0 - eps) * np.exp(-a * np.abs(v)))
    return float(out) if out.ndim == 0 else out


@dataclass
class BowState:
    stuck: bool = False
    side: int = 0
    v_rel: float = 0.0


@dataclass
class BowSolution:
    v_rel: float
    force_factor: float
    stuck: bool
    iterations: int
    residual: float

    def state(self) -> BowState:
        side = 0 if self.stuck else int(math.copysign(1, self.v_rel))
        return BowState(stuck=self.stuck, side=side, v_rel=self.v_rel)


def _slip_bracket(sb: float, c: float, a: float, eps: float) -> Optional[Tuple[float, float]]:
    """
    滑动区间
    Bracket of the stable slip root x > 0 of sb - x - c * psi(x), psi the curve magnitude.

    When c a (1 - eps) > 1 the residual rises up to x = ln(c a (1 - eps)) / a, so the
    stable root lies beyond that point.

    Args:
        sb: b signed toward the slip side being tried
        c, a, eps: coupling coefficient and friction curve parameters

    Returns:
        (lo, hi) with a positive residual at lo, or None when that side has no slip root
    """
    psi = lambda x: eps + (1.0 - eps) * math.exp(-a * x)  # noqa: E731
    slope_gain = c * a * (1.0 - eps)
    lo = 0.0
    if slope_gain > 1.0:
        lo = math.log(slope_gain) / a
    if sb - lo - c * psi(lo) <= 0.0:
        return None
    return lo, max(sb, lo)


def _newton_slip(sb, c, a, eps, bracket, guess, tol, max_iter):
    lo, hi = bracket
    scale = max(abs(sb), c, 1e-300)
    x = guess if lo < guess < hi else 0.5 * (lo + hi)
    residual = float("inf")
    for iteration in range(1, max_iter + 1):
        decay = (1.0 - eps) * math.exp(-a * x)
        residual = sb - x - c * (eps + decay)
        if residual > 0:
            lo = x
        else:
            hi = x
        derivative = -1.0 + c * a * decay
        step = residual / derivative if derivative != 0 else 0.0
        candidate = x - step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - x) <= tol * max(abs(x), scale) or abs(residual) <= tol * scale:
            return candidate, iteration, abs(residual)
        x = candidate
    return x, max_iter, abs(residual)


def _edge_of_branch(b: float, c: float, a: float, eps: float, branch: int) -> BowSolution:
    """Closest admissible point of a branch that has no solution for this b."""
    if branch == 0:
        factor = min(max(b / c, -1.0), 1.0)
        return BowSolution(v_rel=0.0, force_factor=factor, stuck=True, iterations=1, residual=abs(b - c * factor))
    slope_gain = c * a * (1.0 - eps)
    lo = math.log(slope_gain) / a if slope_gain > 1.0 else 0.0
    psi = eps + (1.0 - eps) * math.exp(-a * lo)
    residual = abs(branch * b - lo - c * psi)
    return BowSolution(v_rel=branch * lo, force_factor=branch * psi, stuck=False, iterations=1, residual=residual)


def solve_bow(
    b: float,
    c: float,
    a: float,
    eps: float,
    previous: Optional[BowState] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    step: int = -1,
    branch: Optional[int] = None,
) -> BowSolution:
    """
    求解弓弦相对速度
    Relative bow velocity and effective friction factor for one step.

    Args:
        b, c: coefficients of v = b - c * phi(v)
        a, eps: friction curve sharpness and offset
        previous: state of the previous step (or pass), picks the branch when several exist
        branch: force stick (0) or a slip side (+1 / -1); an infeasible forced
            branch returns its edge value with the mismatch as residual

    Returns:
        BowSolution with v_rel, force factor phi, stick flag, iterations and residual
    """
    previous = previous or BowState()
    if c <= 0.0:
        return BowSolution(v_rel=b, force_factor=0.0, stuck=False, iterations=1, residual=0.0)

    can_stick = abs(b) <= c
    brackets = {side: _slip_bracket(side * b, c, a, eps) for side in (1, -1)}

    if branch is not None:
        feasible = can_stick if branch == 0 else brackets[branch] is not None
        if not feasible:
            return _edge_of_branch(b, c, a, eps, branch)
        choice = branch
    elif previous.stuck and can_stick:
        choice = 0
    elif previous.side and brackets[previous.side] is not None:
        choice = previous.side
    elif can_stick:
        choice = 0
    elif brackets[1 if b >= 0 else -1] is not None:
        choice = 1 if b >= 0 else -1
    elif brackets[-1 if b >= 0 else 1] is not None:
        choice = -1 if b >= 0 else 1
    else:
        raise ConvergenceError(step, "bow", abs(b), 0)

    if choice == 0:
        return BowSolution(v_rel=0.0, force_factor=b / c, stuck=True, iterations=1, residual=0.0)

    guess = abs(previous.v_rel) if previous.side == choice else -1.0
    x, iterations, residual = _newton_slip(choice * b, c, a, eps, brackets[choice], guess, tol, max_iter)
    scale = max(abs(b), c)
    if residual > math.sqrt(tol) * scale and iterations >= max_iter:
        raise ConvergenceError(step, "bow", residual, iterations)
    v = choice * x
    return BowSolution(
        v_rel=v,
        force_factor=friction_curve(v, a, eps),
        stuck=False,
        iterations=iterations,
        residual=residual,
    )


def bow_couple(state, system, spec: BowSpec, t: float, solver: SolverSettings, previous: Optional[BowState] = None):
    """
    Couple one bow to the step described by ``system``.

    Sign convention: I Gamma_B sign(v_rel) >= 0, so friction drags the string
    along with the bow (Gamma_B sits on the left of A w+ + B w + C w- + Gamma = 0).

    Returns the excitation term Gamma_B (full state length), the relative
    velocity and the iteration count.
    """
    asm = system.assembler
    ops = system.operators
    k = asm.k
    force = spec.f_b(t)
    reader = ops.read(spec.x_b(t))
    spread = np.zeros(asm.size)
    spread[: asm.n_u] = reader / ops.grid.h_t

    columns = system.solve(np.column_stack([system.rhs(state.w_curr, state.w_prev), spread]))
    w_free, g = columns[:, 0], columns[:, 1]
    u_prev = state.w_prev[: asm.n_u]
    b = reader @ (w_free[: asm.n_u] - u_prev) / (2.0 * k) - spec.v_b(t)
    c = k * force * (reader @ g[: asm.n_u]) / 2.0
    solution = solve_bow(b, c, spec.a, spec.eps, previous, solver.newton_tol, solver.newton_max_iter, state.step)
    gamma = k ** 2 * force * solution.force_factor * spread
    return gamma, solution.v_rel, solution.iterations
