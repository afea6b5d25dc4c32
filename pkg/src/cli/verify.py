"""
验收测试套件
Self-checks of a build: detune, mode match, decoupling, oracle equivalence and dissipation.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from ..analysis.modes import fletcher_modes, match_modes
from ..analysis.pitch import estimate_f0
from ..analysis.reference import stencil_reference, theta_reference
from ..analysis.spectrum import spectrum
from ..core.engine import Simulation, render, step
from ..core.errors import SynthError
from ..core.params import SimulationConfig, from_f0
from ..excitation.specs import PluckSpec

logger = logging.getLogger(__name__)
console = Console()

DETUNE_KAPPAS = (0.5, 2.0, 5.88, 9.63)
DETUNE_LIMIT = 2.0
ESTIMATOR_ALLOWANCE = 1.0


@dataclass
class Check:
    label: str
    measured: float
    threshold: str
    passed: bool


@dataclass
class SuiteResult:
    name: str
    checks: List[Check] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, label: str, measured: float, threshold: str, passed: bool) -> None:
        self.checks.append(Check(label, float(measured), threshold, bool(passed)))


def pluck_config(f0: float, sample_rate: float = 48000.0, duration: float = 1.0,
                 pluck: Optional[PluckSpec] = None, **string) -> SimulationConfig:
    return SimulationConfig(
        string=from_f0(f0, **string),
        sample_rate=sample_rate,
        duration=duration,
        excitations=(pluck or PluckSpec(c0=0.002),),
    )


def suite_detune(result: SuiteResult) -> None:
    """Lossless plucks at f0 = 300 Hz, alpha = 3 over a kappa sweep."""
    deviations = []
    for kappa in DETUNE_KAPPAS:
        config = pluck_config(300.0, sample_rate=96000.0, kappa=kappa, alpha=3.0)
        estimate = estimate_f0(render(config).samples, config.sample_rate)
        expected = fletcher_modes(300.0, kappa, 1).modes[0]
        limit = DETUNE_LIMIT + ESTIMATOR_ALLOWANCE
        result.add(f"kappa={kappa:g} detune (Hz)", estimate - expected, f"|x| < {limit:g}",
                   abs(estimate - expected) < limit)
        deviations.append(abs(estimate - 300.0))
    monotone = all(b >= a for a, b in zip(deviations, deviations[1:]))
    result.add("|f_est - f0| growth over kappa", deviations[-1] - deviations[0], "non-decreasing", monotone)


def suite_modes(result: SuiteResult) -> None:
    """Linear stiff pluck: spectral peaks against the first ten closed-form modes."""
    config = pluck_config(200.0, kappa=2.0, pluck=PluckSpec(c0=0.002, x_p=0.137, width=0.1))
    config = config.updated(readout_position=0.11)
    report = spectrum(render(config).samples, config.sample_rate)
    match = match_modes(report.peak_frequencies, fletcher_modes(200.0, 2.0, 10), tolerance=0.01)
    result.add("modes within 1%", match.matched, "≥ 8 of 10", match.matched >= 8)


def suite_decoupling(result: SuiteResult) -> None:
    """alpha = 1 with zero longitudinal data keeps the longitudinal field at zero."""
    config = pluck_config(300.0, kappa=2.0)
    sim = Simulation(config)
    state = sim.initial_state()
    peak = 0.0
    for _ in range(48000):
        state, _ = sim.advance(state)
        peak = max(peak, float(np.abs(state.w_curr[sim.n_u:]).max(initial=0.0)))
    result.add("max |zeta| over 48000 steps", peak, "≤ 1e-14", peak <= 1e-14)


def suite_oracle(result: SuiteResult) -> None:
    """Matrix engine against the pointwise explicit stencil and the dense theta-scheme solve, 1000 steps each."""
    config = pluck_config(750.0, theta=1.0)
    sim = Simulation(config)
    state = sim.initial_state()
    n_steps = 1000
    reference = stencil_reference(
        state.w_prev[: sim.n_u], state.w_curr[: sim.n_u], n_steps,
        config.string.gamma, config.string.kappa, sim.k, sim.grid.h_t, config.boundary,
    )
    deviation = 0.0
    for n in range(n_steps):
        state = step(state, sim.assembler.assemble(state.w_curr, state.step))
        deviation = max(deviation, float(np.abs(state.w_curr[: sim.n_u] - reference[n + 2]).max()))
    result.add(f"n_t={sim.grid.n_t} max |u - u_ref|", deviation, "< 1e-10", deviation < 1e-10)

    # default theta with losses, against the dense entrywise solve
    config = pluck_config(750.0, kappa=2.0, sigma0_t=1.0, sigma1_t=1e-4)
    s = config.string
    sim = Simulation(config)
    state = sim.initial_state()
    reference = theta_reference(
        state.w_prev[: sim.n_u], state.w_curr[: sim.n_u], n_steps, s.gamma, s.kappa, s.theta,
        sim.k, sim.grid.h_t, s.sigma0_t, s.sigma1_t, config.boundary,
    )
    deviation = 0.0
    for n in range(n_steps):
        state = step(state, sim.assembler.assemble(state.w_curr, state.step))
        deviation = max(deviation, float(np.abs(state.w_curr[: sim.n_u] - reference[n + 2]).max()))
    result.add(f"theta={s.theta:.4f} max |u - u_ref|", deviation, "< 1e-10", deviation < 1e-10)


def window_rms(samples: np.ndarray, window: int) -> np.ndarray:
    """
    分帧均方根
    RMS of consecutive non-overlapping frames; a trailing partial frame is dropped.

    Args:
        samples: signal
        window: frame length in samples

    Returns:
        one RMS value per complete frame
    """
    count = len(samples) // window
    frames = np.asarray(samples[: count * window]).reshape(count, window)
    return np.sqrt(np.mean(frames ** 2, axis=1))


def suite_dissipation(result: SuiteResult) -> None:
    """sigma0 = 1: 50 ms RMS never grows by more than 5%."""
    config = pluck_config(300.0, sigma0_t=1.0)
    rms = window_rms(render(config).samples, int(0.05 * config.sample_rate))
    growth = float(np.max(rms[1:] / rms[:-1])) if rms.size > 1 else 0.0
    result.add("max window RMS ratio", growth, "≤ 1.05", growth <= 1.05)


SUITES: Dict[str, Callable[[SuiteResult], None]] = {
    "detune": suite_detune,
    "modes": suite_modes,
    "decoupling": suite_decoupling,
    "oracle": suite_oracle,
    "dissipation": suite_dissipation,
}


def run_suites(names: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    """Run the named suites (all by default); a failing render marks its suite failed."""
    results = []
    for name in names or SUITES:
        result = SuiteResult(name)
        if name not in SUITES:
            result.error = f"unknown suite {name!r} (choose from {', '.join(SUITES)})"
            results.append(result)
            continue
        try:
            SUITES[name](result)
        except SynthError as e:
            logger.error(f"suite {name} failed: {e}")
            result.error = f"{type(e).__name__}: {e}"
        results.append(result)
    return results


def display_results(results: Sequence[SuiteResult]) -> None:
    table = Table(title="🎯 验收结果", style="cyan")
    table.add_column("套件", style="yellow")
    table.add_column("检查项")
    table.add_column("测量值", justify="right")
    table.add_column("阈值")
    table.add_column("结论")
    for result in results:
        if result.error:
            table.add_row(result.name, result.error, "", "", "[red]FAIL[/red]")
            continue
        for check in result.checks:
            verdict = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
            table.add_row(result.name, check.label, f"{check.measured:.6g}", check.threshold, verdict)
    console.print(table)
