"""
参数定义与采样
String parameters, run configuration, validation and randomized sampling.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, GridError
from ..excitation.specs import (
    BowSpec,
    Envelope,
    ExcitationKind,
    ExcitationSpec,
    HammerSpec,
    PluckSpec,
    excitation_from_dict,
)

THETA_DEFAULT = (1.0 + 4.0 / math.pi ** 2) / 2.0
MAX_REDRAWS = 100


class LinearSolver(Enum):
    DIRECT_BANDED = "direct-banded"
    DIRECT_SPARSE = "direct-sparse"


class Boundary(Enum):
    CLAMPED = "clamped"
    SIMPLY_SUPPORTED = "simply_supported"


class SamplingLaw(Enum):
    UNIFORM = "uniform"
    LOG_UNIFORM = "log-uniform"


@dataclass(frozen=True)
class StringParams:
    """
    Scaled string parameters (unit length domain).

    gamma: wave speed; kappa: stiffness; alpha: stiffness-to-tension ratio;
    sigma0_*/sigma1_*: frequency-independent / -dependent loss per subsystem;
    theta: implicit scheme parameter. Longitudinal losses default to the
    transverse ones.
    """

    gamma: float
    kappa: float = 0.0
    alpha: float = 1.0
    sigma0_t: float = 0.0
    sigma1_t: float = 0.0
    sigma0_l: Optional[float] = None
    sigma1_l: Optional[float] = None
    theta: float = THETA_DEFAULT

    def __post_init__(self):
        if self.sigma0_l is None:
            object.__setattr__(self, "sigma0_l", self.sigma0_t)
        if self.sigma1_l is None:
            object.__setattr__(self, "sigma1_l", self.sigma1_t)

    def fundamental_frequency(self) -> float:
        return self.gamma / 2

    @property
    def is_linear(self) -> bool:
        return self.alpha == 1.0

    def to_dict(self) -> Dict[str, float]:
        return {
            "gamma": self.gamma,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "sigma0_t": self.sigma0_t,
            "sigma1_t": self.sigma1_t,
            "sigma0_l": self.sigma0_l,
            "sigma1_l": self.sigma1_l,
            "theta": self.theta,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StringParams":
        return cls(**{key: float(value) for key, value in data.items() if value is not None})


def from_f0(f0: float, **kwargs) -> StringParams:
    """Build string parameters from the ideal fundamental (gamma = 2 * f0)."""
    if not f0 > 0:
        raise ConfigError(f"fundamental frequency must be > 0 (got {f0})")
    return StringParams(gamma=2.0 * f0, **kwargs)


@dataclass(frozen=True)
class SolverSettings:
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    linear_solver: LinearSolver = LinearSolver.DIRECT_BANDED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "newton_tol": self.newton_tol,
            "newton_max_iter": self.newton_max_iter,
            "linear_solver": self.linear_solver.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolverSettings":
        return cls(
            newton_tol=float(data.get("newton_tol", 1e-10)),
            newton_max_iter=int(data.get("newton_max_iter", 50)),
            linear_solver=LinearSolver(data.get("linear_solver", LinearSolver.DIRECT_BANDED.value)),
        )


@dataclass(frozen=True)
class SimulationConfig:
    string: StringParams
    sample_rate: float = 48000.0
    duration: float = 1.0
    excitations: Tuple[ExcitationSpec, ...] = ()
    readout_position: float = 0.3
    readout_mix: Tuple[float, float] = (1.0, 0.0)
    interpolation_order: int = 3
    solver: SolverSettings = field(default_factory=SolverSettings)
    boundary: Boundary = Boundary.CLAMPED
    seed: Optional[int] = None

    @property
    def k(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def n_steps(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def plucks(self) -> List[PluckSpec]:
        return [e for e in self.excitations if isinstance(e, PluckSpec)]

    def bows(self) -> List[BowSpec]:
        return [e for e in self.excitations if isinstance(e, BowSpec)]

    def hammers(self) -> List[HammerSpec]:
        return [e for e in self.excitations if isinstance(e, HammerSpec)]

    def updated(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "string": self.string.to_dict(),
            "sample_rate": self.sample_rate,
            "duration": self.duration,
            "excitations": [e.to_dict() for e in self.excitations],
            "readout_position": self.readout_position,
            "readout_mix": list(self.readout_mix),
            "interpolation_order": self.interpolation_order,
            "solver": self.solver.to_dict(),
            "boundary": self.boundary.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimulationConfig":
        try:
            mix = data.get("readout_mix", (1.0, 0.0))
            return cls(
                string=StringParams.from_dict(data["string"]),
                sample_rate=float(data.get("sample_rate", 48000.0)),
                duration=float(data.get("duration", 1.0)),
                excitations=tuple(excitation_from_dict(e) for e in data.get("excitations", [])),
                readout_position=float(data.get("readout_position", 0.3)),
                readout_mix=(float(mix[0]), float(mix[1])),
                interpolation_order=int(data.get("interpolation_order", 3)),
                solver=SolverSettings.from_dict(data.get("solver", {})),
                boundary=Boundary(data.get("boundary", Boundary.CLAMPED.value)),
                seed=data.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed configuration snapshot: {e}")


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise ConfigError("; ".join(self.violations))


def validate(config: SimulationConfig) -> ValidationReport:
    """Collect every constraint violation of a configuration (never raises, never mutates)."""
    issues: List[str] = []
    s = config.string

    if not s.gamma > 0:
        issues.append(f"gamma must be > 0 (got {s.gamma})")
    if not s.kappa >= 0:
        issues.append(f"kappa must be ≥ 0 (got {s.kappa})")
    if not s.alpha >= 1:
        issues.append(f"alpha must be ≥ 1 (got {s.alpha})")
    for name in ("sigma0_t", "sigma1_t", "sigma0_l", "sigma1_l"):
        value = getattr(s, name)
        if not value >= 0:
            issues.append(f"{name} must be ≥ 0 (got {value})")
    if not s.theta >= 0.5:
        issues.append(f"theta must be ≥ 1/2 (got {s.theta})")

    if not config.sample_rate > 0:
        issues.append(f"sample_rate must be > 0 (got {config.sample_rate})")
    if not config.duration >= 0:
        issues.append(f"duration must be ≥ 0 (got {config.duration})")
    if not 0 < config.readout_position < 1:
        issues.append(f"readout_position must lie in (0, 1) (got {config.readout_position})")
    if len(config.readout_mix) != 2 or not all(np.isfinite(config.readout_mix)):
        issues.append(f"readout_mix must be two finite weights (got {config.readout_mix})")
    if config.interpolation_order < 1:
        issues.append(f"interpolation_order must be ≥ 1 (got {config.interpolation_order})")
    if not config.solver.newton_tol > 0:
        issues.append(f"newton_tol must be > 0 (got {config.solver.newton_tol})")
    if config.solver.newton_max_iter < 1:
        issues.append(f"newton_max_iter must be ≥ 1 (got {config.solver.newton_max_iter})")

    duration = max(config.duration, 0.0)
    for spec in config.excitations:
        if isinstance(spec, BowSpec):
            issues.extend(spec.validate(duration))
        else:
            issues.extend(spec.validate())

    if len(config.plucks()) > 1:
        issues.append("at most one pluck is allowed (it sets the initial condition)")
    windows = sorted(bow.active_window(duration) for bow in config.bows())
    for (_, end), (start, _) in zip(windows, windows[1:]):
        if start < end:
            issues.append("bows overlap in time; only one bow may act at once")
            break

    return ValidationReport(issues)


@dataclass(frozen=True)
class ParamRange:
    low: float
    high: float
    law: SamplingLaw = SamplingLaw.UNIFORM

    def validate(self, name: str) -> List[str]:
        issues = []
        if not self.low <= self.high:
            issues.append(f"{name}: min ({self.low}) must be ≤ max ({self.high})")
        if self.law is SamplingLaw.LOG_UNIFORM and not self.low > 0:
            issues.append(f"{name}: log-uniform range needs min > 0 (got {self.low})")
        return issues

    def draw(self, rng: np.random.Generator) -> float:
        if self.low == self.high:
            return self.low
        if self.law is SamplingLaw.LOG_UNIFORM:
            value = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            value = rng.uniform(self.low, self.high)
        return min(max(value, self.low), self.high)

    def to_dict(self) -> Dict[str, Any]:
        return {"min": self.low, "max": self.high, "law": self.law.value}


LOG = SamplingLaw.LOG_UNIFORM
UNI = SamplingLaw.UNIFORM

# Loss ranges are repo choices; the other defaults follow the published figures.
DEFAULT_RANGES: Dict[str, ParamRange] = {
    "f0": ParamRange(80.0, 600.0, LOG),
    "kappa": ParamRange(0.5, 10.0, LOG),
    "alpha": ParamRange(1.0, 4.0, UNI),
    "sigma0": ParamRange(0.05, 2.0, LOG),
    "sigma1": ParamRange(1e-6, 1e-3, LOG),
    "pluck_amplitude": ParamRange(1e-3, 1e-2, LOG),
    "pluck_position": ParamRange(0.1, 0.45, UNI),
    "pluck_width": ParamRange(0.1, 0.2, UNI),
    "bow_position": ParamRange(0.05, 0.2, UNI),
    "bow_velocity": ParamRange(0.05, 0.4, UNI),
    "bow_force": ParamRange(50.0, 2000.0, LOG),
    "bow_sharpness": ParamRange(10.0, 200.0, LOG),
    "bow_epsilon": ParamRange(0.0, 0.5, UNI),
    "hammer_position": ParamRange(0.05, 0.25, UNI),
    "hammer_velocity": ParamRange(0.5, 4.0, LOG),
    "hammer_mass_ratio": ParamRange(0.1, 2.0, LOG),
    "hammer_omega": ParamRange(500.0, 3000.0, LOG),
    "hammer_exponent": ParamRange(1.5, 3.5, UNI),
}


@dataclass(frozen=True)
class ParamDistribution:
    """Sampling ranges for every randomized control, plus a master seed and the run template."""

    ranges: Dict[str, ParamRange] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    excitations: Tuple[str, ...] = ("pluck",)
    seed: int = 0
    base: SimulationConfig = field(
        default_factory=lambda: SimulationConfig(string=StringParams(gamma=600.0))
    )

    def validate(self) -> List[str]:
        issues = []
        for name, rng_spec in self.ranges.items():
            if name not in DEFAULT_RANGES:
                issues.append(f"unknown sampled parameter {name!r}")
            issues.extend(rng_spec.validate(name))
        if not self.excitations:
            issues.append("distribution needs at least one excitation kind")
        for kind in self.excitations:
            if kind not in {k.value for k in ExcitationKind}:
                issues.append(f"unknown excitation kind {kind!r}")
        if not 0 <= self.seed < 2 ** 64:
            issues.append(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        return issues

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ranges": {name: r.to_dict() for name, r in self.ranges.items()},
            "excitations": list(self.excitations),
            "seed": self.seed,
            "base": self.base.to_dict(),
        }


def sample_seed(master_seed: int, index: int) -> int:
    """Per-sample 64-bit seed; depends only on (master seed, index)."""
    state = np.random.SeedSequence([master_seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _draw_config(dist: ParamDistribution, rng: np.random.Generator, seed: int) -> SimulationConfig:
    r = dist.ranges
    base = dist.base
    # fixed draw order keeps the stream layout stable across versions
    f0 = r["f0"].draw(rng)
    kappa = r["kappa"].draw(rng)
    alpha = r["alpha"].draw(rng)
    sigma0 = r["sigma0"].draw(rng)
    sigma1 = r["sigma1"].draw(rng)
    kind = dist.excitations[int(rng.integers(len(dist.excitations)))]

    pluck = PluckSpec(
        c0=r["pluck_amplitude"].draw(rng),
        x_p=r["pluck_position"].draw(rng),
        width=r["pluck_width"].draw(rng),
    )
    bow = BowSpec(
        x_b=Envelope.constant(r["bow_position"].draw(rng)),
        v_b=Envelope.constant(r["bow_velocity"].draw(rng)),
        f_b=Envelope.constant(r["bow_force"].draw(rng)),
        a=r["bow_sharpness"].draw(rng),
        eps=r["bow_epsilon"].draw(rng),
    )
    hammer = HammerSpec(
        x_h=r["hammer_position"].draw(rng),
        v_h0=r["hammer_velocity"].draw(rng),
        mass_ratio=r["hammer_mass_ratio"].draw(rng),
        omega_h=r["hammer_omega"].draw(rng),
        alpha_h=r["hammer_exponent"].draw(rng),
    )
    chosen = {"pluck": pluck, "bow": bow, "hammer": hammer}[kind]

    string = replace(
        base.string,
        gamma=2.0 * f0,
        kappa=kappa,
        alpha=alpha,
        sigma0_t=sigma0,
        sigma1_t=sigma1,
        sigma0_l=sigma0,
        sigma1_l=sigma1,
    )
    return replace(base, string=string, excitations=(chosen,), seed=seed)


def draw(dist: ParamDistribution, index: int) -> SimulationConfig:
    """Draw sample ``index`` of a distribution; invalid draws are redrawn from the same stream."""
    from ..numerics.grid_ops import compute_grid

    seed = sample_seed(dist.seed, index)
    rng = _rng(seed)
    for _ in range(MAX_REDRAWS):
        config = _draw_config(dist, rng, seed)
        if not validate(config).ok:
            continue
        try:
            compute_grid(config.string, config.sample_rate)
        except GridError:
            continue
        return config
    raise ConfigError(
        f"sample {index}: no valid configuration after {MAX_REDRAWS} draws, check the ranges"
    )


def sample(dist: ParamDistribution, n: int) -> List[SimulationConfig]:
    issues = dist.validate()
    if issues:
        raise ConfigError("; ".join(issues))
    if n < 0:
        raise ConfigError(f"sample count must be ≥ 0 (got {n})")
    return [draw(dist, index) for index in range(n)]
