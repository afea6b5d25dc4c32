"""
KEY=VALUE configuration files (render configs, parameter distributions, benchmark sweeps).

Files use the .env syntax and are read with python-dotenv, so comments (#),
quoting and blank lines behave exactly as in an environment file.
"""

import re
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from dotenv import dotenv_values

from .errors import ConfigError
from .params import (
    DEFAULT_RANGES,
    Boundary,
    LinearSolver,
    ParamDistribution,
    ParamRange,
    SamplingLaw,
    SimulationConfig,
    SolverSettings,
    StringParams,
)
from ..excitation.specs import BowSpec, Envelope, ExcitationKind, HammerSpec, PluckSpec

PathLike = Union[str, Path]

STRING_KEYS = {
    "KAPPA": "kappa",
    "ALPHA": "alpha",
    "SIGMA0": "sigma0_t",
    "SIGMA1": "sigma1_t",
    "SIGMA0_L": "sigma0_l",
    "SIGMA1_L": "sigma1_l",
    "THETA": "theta",
}
RUN_KEYS = {
    "SAMPLE_RATE",
    "DURATION",
    "READOUT_POSITION",
    "READOUT_MIX",
    "INTERPOLATION_ORDER",
    "BOUNDARY",
    "NEWTON_TOL",
    "NEWTON_MAX_ITER",
    "LINEAR_SOLVER",
    "SEED",
}
EXCITATION_KEY = re.compile(r"^(PLUCK|BOW|HAMMER)(\d*)_([A-Z_]+)$")

PLUCK_FIELDS = {"AMPLITUDE": "c0", "POSITION": "x_p", "WIDTH": "width"}
BOW_FIELDS = {
    "POSITION": "x_b",
    "VELOCITY": "v_b",
    "FORCE": "f_b",
    "SHARPNESS": "a",
    "EPSILON": "eps",
    "START": "start",
    "END": "end",
}
HAMMER_FIELDS = {
    "POSITION": "x_h",
    "DISPLACEMENT": "u_h0",
    "VELOCITY": "v_h0",
    "MASS_RATIO": "mass_ratio",
    "OMEGA": "omega_h",
    "EXPONENT": "alpha_h",
    "ONSET": "onset",
}
BOW_ENVELOPES = {"x_b", "v_b", "f_b"}


def read_values(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    values = dotenv_values(path)
    return {key.strip().upper(): (value or "").strip() for key, value in values.items()}


def _number(values: Dict[str, str], key: str, cast: Callable = float):
    raw = values[key]
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"{key}={raw!r} is not a valid {cast.__name__}")


def _enum(enum_cls, key: str, raw: str):
    try:
        return enum_cls(raw.lower())
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{key}={raw!r} must be one of: {allowed}")


def _string_params(values: Dict[str, str]) -> StringParams:
    if "F0" in values and "GAMMA" in values:
        raise ConfigError("give either F0 or GAMMA, not both")
    if "F0" in values:
        gamma = 2.0 * _number(values, "F0")
    elif "GAMMA" in values:
        gamma = _number(values, "GAMMA")
    else:
        raise ConfigError("missing required key F0 (or GAMMA)")
    kwargs = {attr: _number(values, key) for key, attr in STRING_KEYS.items() if key in values}
    return StringParams(gamma=gamma, **kwargs)


def _excitation_groups(values: Dict[str, str]) -> List[Tuple[str, Dict[str, str]]]:
    groups: Dict[Tuple[str, str], Dict[str, str]] = {}
    for key, raw in values.items():
        match = EXCITATION_KEY.match(key)
        if not match:
            continue
        kind, suffix, name = match.groups()
        groups.setdefault((kind, suffix), {})[name] = raw
    return [(kind, fields) for (kind, _), fields in groups.items()]


def _build_excitation(kind: str, fields: Dict[str, str]):
    table = {"PLUCK": PLUCK_FIELDS, "BOW": BOW_FIELDS, "HAMMER": HAMMER_FIELDS}[kind]
    kwargs = {}
    for name, raw in fields.items():
        if name not in table:
            raise ConfigError(f"unknown {kind.lower()} key {kind}_{name}")
        attr = table[name]
        try:
            kwargs[attr] = Envelope.parse(raw) if attr in BOW_ENVELOPES else float(raw)
        except ValueError:
            raise ConfigError(f"{kind}_{name}={raw!r} is not a number")
    if kind == "PLUCK":
        return PluckSpec(**kwargs)
    if kind == "BOW":
        return BowSpec(**kwargs)
    return HammerSpec(**kwargs)


def _run_settings(values: Dict[str, str]) -> Dict[str, object]:
    settings: Dict[str, object] = {}
    if "SAMPLE_RATE" in values:
        settings["sample_rate"] = _number(values, "SAMPLE_RATE")
    if "DURATION" in values:
        settings["duration"] = _number(values, "DURATION")
    if "READOUT_POSITION" in values:
        settings["readout_position"] = _number(values, "READOUT_POSITION")
    if "READOUT_MIX" in values:
        parts = values["READOUT_MIX"].replace(",", " ").split()
        try:
            mix = tuple(float(p) for p in parts)
        except ValueError:
            mix = ()
        if len(mix) != 2:
            raise ConfigError(f"READOUT_MIX={values['READOUT_MIX']!r} must be two weights 'u,z'")
        settings["readout_mix"] = mix
    if "INTERPOLATION_ORDER" in values:
        settings["interpolation_order"] = _number(values, "INTERPOLATION_ORDER", int)
    if "BOUNDARY" in values:
        settings["boundary"] = _enum(Boundary, "BOUNDARY", values["BOUNDARY"])
    if "SEED" in values:
        settings["seed"] = _number(values, "SEED", int)
    solver = SolverSettings()
    if "NEWTON_TOL" in values:
        solver = SolverSettings(_number(values, "NEWTON_TOL"), solver.newton_max_iter, solver.linear_solver)
    if "NEWTON_MAX_ITER" in values:
        solver = SolverSettings(solver.newton_tol, _number(values, "NEWTON_MAX_ITER", int), solver.linear_solver)
    if "LINEAR_SOLVER" in values:
        solver = SolverSettings(
            solver.newton_tol, solver.newton_max_iter, _enum(LinearSolver, "LINEAR_SOLVER", values["LINEAR_SOLVER"])
        )
    settings["solver"] = solver
    return settings


def parse_simulation_config(
    values: Dict[str, str], default_sample_rate: Optional[float] = None
) -> SimulationConfig:
    known = set(STRING_KEYS) | RUN_KEYS | {"F0", "GAMMA"}
    for key in values:
        if key not in known and not EXCITATION_KEY.match(key):
            raise ConfigError(f"unknown configuration key {key}")
    if "DURATION" not in values:
        raise ConfigError("missing required key DURATION")
    settings = _run_settings(values)
    if "sample_rate" not in settings:
        if default_sample_rate is None:
            raise ConfigError("missing required key SAMPLE_RATE")
        settings["sample_rate"] = default_sample_rate
    excitations = tuple(_build_excitation(kind, fields) for kind, fields in _excitation_groups(values))
    return SimulationConfig(string=_string_params(values), excitations=excitations, **settings)


def load_simulation_config(path: PathLike, default_sample_rate: Optional[float] = None) -> SimulationConfig:
    return parse_simulation_config(read_values(path), default_sample_rate)


def format_simulation_config(config: SimulationConfig) -> str:
    s = config.string
    lines = [
        f"GAMMA={s.gamma!r}",
        f"KAPPA={s.kappa!r}",
        f"ALPHA={s.alpha!r}",
        f"SIGMA0={s.sigma0_t!r}",
        f"SIGMA1={s.sigma1_t!r}",
        f"SIGMA0_L={s.sigma0_l!r}",
        f"SIGMA1_L={s.sigma1_l!r}",
        f"THETA={s.theta!r}",
        f"SAMPLE_RATE={config.sample_rate!r}",
        f"DURATION={config.duration!r}",
        f"READOUT_POSITION={config.readout_position!r}",
        f"READOUT_MIX={config.readout_mix[0]!r},{config.readout_mix[1]!r}",
        f"INTERPOLATION_ORDER={config.interpolation_order}",
        f"BOUNDARY={config.boundary.value}",
        f"NEWTON_TOL={config.solver.newton_tol!r}",
        f"NEWTON_MAX_ITER={config.solver.newton_max_iter}",
        f"LINEAR_SOLVER={config.solver.linear_solver.value}",
    ]
    if config.seed is not None:
        lines.append(f"SEED={config.seed}")
    counters = {kind: 0 for kind in ExcitationKind}
    for spec in config.excitations:
        counters[spec.kind] += 1
        prefix = spec.kind.value.upper() + (str(counters[spec.kind]) if counters[spec.kind] > 1 else "")
        table = {PluckSpec: PLUCK_FIELDS, BowSpec: BOW_FIELDS, HammerSpec: HAMMER_FIELDS}[type(spec)]
        for name, attr in table.items():
            value = getattr(spec, attr)
            if isinstance(value, Envelope):
                text = value.format()
            elif value == float("inf"):
                continue
            else:
                text = repr(value)
            lines.append(f'{prefix}_{name}="{text}"')
    return "\n".join(lines) + "\n"


def parse_distribution(values: Dict[str, str]) -> ParamDistribution:
    ranges = dict(DEFAULT_RANGES)
    rest: Dict[str, str] = {}
    for key, raw in values.items():
        name, _, bound = key.rpartition("_")
        attr = name.lower()
        if bound in ("MIN", "MAX", "LAW") and attr in DEFAULT_RANGES:
            current = ranges[attr]
            if bound == "LAW":
                ranges[attr] = ParamRange(current.low, current.high, _enum(SamplingLaw, key, raw))
            elif bound == "MIN":
                ranges[attr] = ParamRange(_number(values, key), current.high, current.law)
            else:
                ranges[attr] = ParamRange(current.low, _number(values, key), current.law)
        else:
            rest[key] = raw

    seed = _number(rest, "SEED", int) if "SEED" in rest else 0
    kinds = tuple(k.strip().lower() for k in rest.pop("EXCITATIONS", "pluck").split(",") if k.strip())
    rest.pop("SEED", None)
    for key in rest:
        if key not in RUN_KEYS and key != "THETA":
            raise ConfigError(f"unknown distribution key {key}")
    base_values = dict(rest)
    base_values.setdefault("DURATION", "1.0")
    base = parse_simulation_config({**base_values, "GAMMA": "600"}, default_sample_rate=48000.0)
    dist = ParamDistribution(ranges=ranges, excitations=kinds, seed=seed, base=base)
    issues = dist.validate()
    if issues:
        raise ConfigError("; ".join(issues))
    return dist


def load_distribution(path: PathLike) -> ParamDistribution:
    return parse_distribution(read_values(path))


def _int_list(values: Dict[str, str], key: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in values.get(key, "").replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}={values[key]!r} must be a comma list of integers")


def _float_list(values: Dict[str, str], key: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in values.get(key, "").replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}={values[key]!r} must be a comma list of numbers")


def parse_sweep(values: Dict[str, str]):
    from ..analysis.benchmark import BenchmarkSweep

    base_values = {key[len("BASE_"):]: raw for key, raw in values.items() if key.startswith("BASE_")}
    for key in values:
        if not key.startswith("BASE_") and key not in ("N_STEPS", "F0", "BATCH", "WORKERS"):
            raise ConfigError(f"unknown sweep key {key}")
    if not base_values:
        base_values = {"F0": "300", "DURATION": "0.1"}
    base_values.setdefault("DURATION", "0.1")
    if "F0" not in base_values and "GAMMA" not in base_values:
        base_values["F0"] = "300"
    base = parse_simulation_config(base_values, default_sample_rate=48000.0)
    return BenchmarkSweep(
        base=base,
        n_steps=_int_list(values, "N_STEPS"),
        f0=_float_list(values, "F0"),
        batch=_int_list(values, "BATCH"),
        workers=_int_list(values, "WORKERS"),
    )


def load_sweep(path: PathLike):
    return parse_sweep(read_values(path))
