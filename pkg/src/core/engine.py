"""
合成引擎核心
Time stepping of the string scheme with excitation coupling, readout and diagnostics.
"""

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from .config import AppConfig
from .errors import ConvergenceError, SimulationDivergedError, SynthError
from .params import SimulationConfig, validate
from ..excitation.bow import BowState, solve_bow
from ..excitation.hammer import HammerState, hammer_terms, solve_hammer
from ..excitation.pluck import pluck_init
from ..excitation.schedule import excitation_schedule
from ..excitation.specs import BowSpec, HammerSpec
from ..numerics.assembly import BlockSystem, SchemeAssembler
from ..numerics.grid_ops import Grid, build_operators, check_grid, compute_grid

logger = logging.getLogger(__name__)
console = Console()

ENGINE_VERSION = "1.0.0"
DIVERGENCE_FACTOR = 1e6
GROWTH_WARNING = 10.0
PROGRESS_EVERY = 1000
# inner scalar solves are only accurate to about newton_tol
COUPLING_TOL_FACTOR = 10.0
BRANCH_FREEZE_PASSES = 8


@dataclass
class StringState:
    """Two consecutive time levels w = [u; zeta] plus the excitations' internal state."""

    w_prev: np.ndarray
    w_curr: np.ndarray
    step: int = 1
    hammers: Dict[int, HammerState] = field(default_factory=dict)
    bows: Dict[int, BowState] = field(default_factory=dict)

    def reversed(self) -> "StringState":
        return StringState(self.w_curr.copy(), self.w_prev.copy(), self.step)


@dataclass
class StepReport:
    iterations: int = 0
    residual: float = 0.0
    hammer_force: float = 0.0
    bow_v_rel: float = float("nan")
    stuck: bool = False
    strengths: Dict[int, float] = field(default_factory=dict)


@dataclass
class RenderDiagnostics:
    newton_iterations: np.ndarray
    max_residual: np.ndarray
    hammer_force: np.ndarray
    bow_v_rel: np.ndarray
    stick_steps: int = 0
    peak: float = 0.0
    runtime_seconds: float = 0.0
    warnings: List[str] = field(default_factory=list)

    @classmethod
    def empty(cls, n: int) -> "RenderDiagnostics":
        return cls(
            newton_iterations=np.zeros(n, dtype=np.int32),
            max_residual=np.zeros(n),
            hammer_force=np.zeros(n),
            bow_v_rel=np.full(n, np.nan),
        )

    def summary(self) -> Dict[str, Any]:
        return {
            "newton_iterations_total": int(self.newton_iterations.sum()),
            "newton_iterations_max": int(self.newton_iterations.max(initial=0)),
            "max_residual": float(self.max_residual.max(initial=0.0)),
            "max_hammer_force": float(self.hammer_force.max(initial=0.0)),
            "stick_steps": self.stick_steps,
            "peak": self.peak,
            "render_seconds": self.runtime_seconds,
            "warnings": list(self.warnings),
        }


@dataclass
class RenderResult:
    samples: np.ndarray
    sample_rate: float
    diagnostics: RenderDiagnostics
    provenance: Dict[str, Any]
    u_field: Optional[np.ndarray] = None
    z_field: Optional[np.ndarray] = None

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def metadata(self) -> Dict[str, Any]:
        return {**self.provenance, "diagnostics": self.diagnostics.summary()}


def step(state: StringState, system: BlockSystem, excitation_force: Optional[np.ndarray] = None) -> StringState:
    """Advance one step: solve A w+ = -(B w + C w- + Gamma)."""
    rhs = system.rhs(state.w_curr, state.w_prev)
    if excitation_force is not None:
        rhs = rhs - excitation_force
    w_next = system.solve(rhs)
    return StringState(state.w_curr, w_next, state.step + 1, dict(state.hammers), dict(state.bows))


class Simulation:
    """Mutable machinery of one render: grid, operators, assembler and readout weights."""

    def __init__(self, config: SimulationConfig, grid: Optional[Grid] = None):
        self.config = config
        self.grid = grid or compute_grid(config.string, config.sample_rate)
        self.ops = build_operators(self.grid, config.interpolation_order, config.boundary)
        self.assembler = SchemeAssembler(self.ops, config.string, config.solver.linear_solver)
        self.k = self.grid.k
        self.n_u = self.grid.n_u
        self.solver = config.solver
        mix_u, mix_z = config.readout_mix
        self._out_u = mix_u * self.ops.read(config.readout_position)
        self._out_z = mix_z * self.ops.read_l(config.readout_position) if mix_z else None
        self._readers: Dict[float, np.ndarray] = {}

    def initial_state(self) -> StringState:
        plucks = self.config.plucks()
        if plucks:
            w0, w1 = pluck_init(plucks[0], self.grid)
        else:
            w0 = np.zeros(self.grid.size)
            w1 = w0.copy()
        return StringState(w0, w1, step=1)

    def readout(self, w: np.ndarray) -> float:
        y = self._out_u @ w[: self.n_u]
        if self._out_z is not None:
            y += self._out_z @ w[self.n_u:]
        return float(y)

    def reader(self, x: float) -> np.ndarray:
        if x not in self._readers:
            if len(self._readers) > 4096:
                self._readers.clear()
            self._readers[x] = self.ops.read(x)
        return self._readers[x]

    def _position(self, spec, t: float) -> float:
        return spec.x_b(t) if isinstance(spec, BowSpec) else spec.x_h

    def advance(self, state: StringState) -> Tuple[StringState, StepReport]:
        n = state.step
        t = n * self.k
        specs = self.config.excitations
        system = self.assembler.assemble(state.w_curr, step=n)
        rhs = system.rhs(state.w_curr, state.w_prev)
        active = excitation_schedule(specs, t)
        if not active:
            w_next = system.solve(rhs)
            return StringState(state.w_curr, w_next, n + 1, dict(state.hammers)), StepReport()

        readers = np.array([self.reader(self._position(specs[i], t)) for i in active])
        spreads = np.zeros((self.grid.size, len(active)))
        spreads[: self.n_u] = readers.T / self.grid.h_t
        columns = system.solve(np.column_stack([rhs, spreads]))
        w_free, g = columns[:, 0], columns[:, 1:]
        y_free = readers @ w_free[: self.n_u]
        y_prev = readers @ state.w_prev[: self.n_u]
        response = readers @ g[: self.n_u]

        hammers = dict(state.hammers)
        for i in active:
            if isinstance(specs[i], HammerSpec) and i not in hammers:
                hammers[i] = HammerState.launch(specs[i], self.k)

        report = StepReport()
        strengths = np.zeros(len(active))
        forces = np.zeros(len(active))
        bow_states: Dict[int, BowState] = {}
        tol, max_iter = self.solver.newton_tol, self.solver.newton_max_iter
        change = 0.0
        # block Gauss-Seidel; a bow keeps the branch of the previous pass, fixed after BRANCH_FREEZE_PASSES
        for sweep in range(max_iter):
            change = 0.0
            for j, i in enumerate(active):
                spec = specs[i]
                y_base = y_free[j] - response[j] @ strengths + response[j, j] * strengths[j]
                if isinstance(spec, BowSpec):
                    force = spec.f_b(t)
                    b = (y_base - y_prev[j]) / (2.0 * self.k) - spec.v_b(t)
                    c = self.k * force * response[j, j] / 2.0
                    previous = bow_states.get(i, state.bows.get(i))
                    branch = None
                    if sweep >= BRANCH_FREEZE_PASSES:
                        branch = 0 if previous.stuck else previous.side
                    solution = solve_bow(b, c, spec.a, spec.eps, previous, tol, max_iter, n, branch)
                    new = self.k ** 2 * force * solution.force_factor
                    bow_states[i] = solution.state()
                    report.bow_v_rel = solution.v_rel
                    report.stuck = solution.stuck
                    iterations, residual = solution.iterations, solution.residual
                else:
                    e0, sigma = hammer_terms(hammers[i], y_base, y_prev[j], response[j, j], spec, self.k)
                    forces[j], iterations, residual = solve_hammer(
                        e0, sigma, spec.omega_h, spec.alpha_h, tol, max_iter, n
                    )
                    new = -(self.k ** 2) * spec.mass_ratio * forces[j]
                report.iterations += iterations
                report.residual = max(report.residual, residual)
                change = max(change, abs(new - strengths[j]))
                strengths[j] = new
            if len(active) == 1 or change <= COUPLING_TOL_FACTOR * tol * max(np.abs(strengths).max(), 1e-300):
                break
        else:
            raise ConvergenceError(n, "bow/hammer", change, max_iter)

        w_next = w_free - g @ strengths
        report.strengths = {i: float(strengths[j]) for j, i in enumerate(active)}
        for j, i in enumerate(active):
            if isinstance(specs[i], HammerSpec):
                hammers[i] = hammers[i].advance(forces[j], self.k)
                report.hammer_force += forces[j]
        return StringState(state.w_curr, w_next, n + 1, hammers, bow_states), report


def render(
    config: SimulationConfig,
    dump_fields: bool = False,
    progress: Optional[Callable[[int, int], None]] = None,
) -> RenderResult:
    """Run a full render: N_t = round(duration * fs) output samples y^0 .. y^(N_t - 1)."""
    validate(config).raise_if_invalid()
    started = time.perf_counter()
    sim = Simulation(config)
    n_steps = config.n_steps
    samples = np.zeros(n_steps)
    diagnostics = RenderDiagnostics.empty(n_steps)
    diagnostics.warnings.extend(check_grid(sim.grid, config.string).messages)
    u_field = np.zeros((n_steps, sim.n_u)) if dump_fields else None
    z_field = np.zeros((n_steps, sim.grid.n_l - 1)) if dump_fields else None

    state = sim.initial_state()
    initial_peak = float(max(np.abs(state.w_prev).max(), np.abs(state.w_curr).max()))
    threshold = DIVERGENCE_FACTOR * max(initial_peak, 1e-6)
    peak = initial_peak
    warned = False

    for n, w in enumerate((state.w_prev, state.w_curr)[: min(n_steps, 2)]):
        samples[n] = sim.readout(w)
        if dump_fields:
            u_field[n], z_field[n] = w[: sim.n_u], w[sim.n_u:]

    for n in range(1, n_steps - 1):
        state, report = sim.advance(state)
        current = float(np.abs(state.w_curr).max())
        if not current <= threshold:
            logger.error(f"render diverged at step {n}: max|w|={current:.3e}")
            raise SimulationDivergedError(n, current, threshold)
        if not warned and initial_peak > 0 and current > GROWTH_WARNING * initial_peak:
            warned = True
            message = f"state grew beyond {GROWTH_WARNING:g}x the initial peak at step {n}"
            logger.warning(message)
            diagnostics.warnings.append(message)
        peak = max(peak, current)
        samples[n + 1] = sim.readout(state.w_curr)
        diagnostics.newton_iterations[n] = report.iterations
        diagnostics.max_residual[n] = report.residual
        diagnostics.hammer_force[n] = report.hammer_force
        diagnostics.bow_v_rel[n] = report.bow_v_rel
        diagnostics.stick_steps += int(report.stuck)
        if dump_fields:
            u_field[n + 1], z_field[n + 1] = state.w_curr[: sim.n_u], state.w_curr[sim.n_u:]
        if progress is not None and n % PROGRESS_EVERY == 0:
            progress(n, n_steps)

    diagnostics.peak = peak
    diagnostics.runtime_seconds = time.perf_counter() - started
    provenance = {
        "engine_version": ENGINE_VERSION,
        "config": config.to_dict(),
        "seed": config.seed,
        "grid": sim.grid.to_dict(),
        "n_samples": n_steps,
    }
    return RenderResult(samples, config.sample_rate, diagnostics, provenance, u_field, z_field)


class SynthesisEngine:
    """
    合成引擎 - 面向应用层的渲染入口
    Keeps session statistics and prints a summary table in verbose mode.
    """

    def __init__(self, app_config: Optional[AppConfig] = None, verbose: Optional[bool] = None):
        self.app_config = app_config or AppConfig()
        self.verbose = self.app_config.verbose if verbose is None else verbose
        self.session_stats = {
            "total_renders": 0,
            "failed_renders": 0,
            "total_steps": 0,
            "total_newton_iterations": 0,
            "total_render_seconds": 0.0,
            "session_start": datetime.now().isoformat(),
        }
        self.session_history: List[Dict[str, Any]] = []

    def render(self, config: SimulationConfig, dump_fields: bool = False) -> RenderResult:
        try:
            if self.verbose:
                result = self._render_with_progress(config, dump_fields)
            else:
                result = render(config, dump_fields)
        except SynthError:
            self.session_stats["failed_renders"] += 1
            raise
        self._update_session_stats(result)
        if self.verbose:
            self._display_summary(result)
        return result

    def render_safe(self, config: SimulationConfig, dump_fields: bool = False) -> Dict[str, Any]:
        """Render without raising; failures come back as a result dict."""
        try:
            return {"success": True, "result": self.render(config, dump_fields)}
        except SynthError as e:
            error_msg = f"渲染失败: {e}"
            if self.verbose:
                console.print(f"[bold red]❌ {error_msg}[/bold red]")
            return {
                "success": False,
                "error": str(e),
                "error_type": type(e).__name__,
                "step": getattr(e, "step", None),
                "timestamp": datetime.now().isoformat(),
            }

    def _render_with_progress(self, config: SimulationConfig, dump_fields: bool) -> RenderResult:
        console.print(Panel(
            f"[bold magenta]🎻 渲染开始[/bold magenta]\n"
            f"[cyan]f0:[/cyan] {config.string.fundamental_frequency():.2f} Hz  "
            f"[cyan]kappa:[/cyan] {config.string.kappa:g}  [cyan]alpha:[/cyan] {config.string.alpha:g}\n"
            f"[cyan]时长:[/cyan] {config.duration:g} s @ {config.sample_rate:g} Hz",
            title="String Synthesis",
            border_style="magenta",
        ))
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TimeElapsedColumn(),
            console=console,
        ) as bar:
            task = bar.add_task("时间步进", total=max(config.n_steps, 1))
            result = render(config, dump_fields, lambda n, total: bar.update(task, completed=n))
            bar.update(task, completed=max(config.n_steps, 1))
        return result

    def _update_session_stats(self, result: RenderResult):
        self.session_stats["total_renders"] += 1
        self.session_stats["total_steps"] += len(result.samples)
        self.session_stats["total_newton_iterations"] += int(result.diagnostics.newton_iterations.sum())
        self.session_stats["total_render_seconds"] += result.diagnostics.runtime_seconds
        self.session_history.append(result.metadata())

    def _display_summary(self, result: RenderResult):
        """显示渲染摘要"""
        grid = result.provenance["grid"]
        diag = result.diagnostics
        table = Table(title="🎯 渲染摘要", style="cyan")
        table.add_column("指标", style="yellow")
        table.add_column("结果", style="green")
        table.add_row("样本数", str(len(result.samples)))
        table.add_row("网格 n_t / n_l", f"{grid['n_t']} / {grid['n_l']}")
        table.add_row("峰值位移", f"{diag.peak:.3e}")
        table.add_row("Newton 迭代", str(int(diag.newton_iterations.sum())))
        table.add_row("粘滞步数", str(diag.stick_steps))
        table.add_row("耗时", f"{diag.runtime_seconds:.2f} 秒")
        console.print(table)
        for warning in diag.warnings:
            console.print(f"[yellow]⚠️  {warning}[/yellow]")

    def get_session_stats(self) -> Dict[str, Any]:
        """获取会话统计"""
        return self.session_stats.copy()

    def clear_session(self):
        self.session_history.clear()
