"""
Excitation specifications: pluck (initial condition), bow and hammer (forcing terms).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ConfigError


class ExcitationKind(Enum):
    PLUCK = "pluck"
    BOW = "bow"
    HAMMER = "hammer"


@dataclass(frozen=True)
class Envelope:
    """Piecewise-linear control curve given by (time, value) breakpoints; held constant outside."""

    times: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ConfigError("envelope needs matching, non-empty time and value lists")
        if any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError(f"envelope breakpoints must be sorted in time: {self.times}")

    @classmethod
    def constant(cls, value: float) -> "Envelope":
        return cls((0.0,), (float(value),))

    @classmethod
    def parse(cls, text: str) -> "Envelope":
        """Parse ``"0.5"`` (constant) or ``"0:0.2 1.3:0.2 1.31:0"`` (breakpoints)."""
        tokens = text.replace(",", " ").split()
        if not tokens:
            raise ConfigError("empty envelope")
        if len(tokens) == 1 and ":" not in tokens[0]:
            return cls.constant(float(tokens[0]))
        times, values = [], []
        for token in tokens:
            try:
                t, v = token.split(":")
                times.append(float(t))
                values.append(float(v))
            except ValueError:
                raise ConfigError(f"bad envelope breakpoint {token!r}, expected time:value")
        return cls(tuple(times), tuple(values))

    def __call__(self, t: float) -> float:
        if len(self.times) == 1:
            return self.values[0]
        return float(np.interp(t, self.times, self.values))

    def minimum(self) -> float:
        return min(self.values)

    def maximum(self) -> float:
        return max(self.values)

    def format(self) -> str:
        if len(self.times) == 1:
            return repr(self.values[0])
        return " ".join(f"{t!r}:{v!r}" for t, v in zip(self.times, self.values))

    def to_list(self) -> List[List[float]]:
        return [[t, v] for t, v in zip(self.times, self.values)]

    @classmethod
    def from_list(cls, points: Sequence[Sequence[float]]) -> "Envelope":
        return cls(tuple(float(p[0]) for p in points), tuple(float(p[1]) for p in points))


@dataclass(frozen=True)
class PluckSpec:
    c0: float = 0.0078
    x_p: float = 0.14
    width: float = 0.2
    kind: ExcitationKind = field(default=ExcitationKind.PLUCK, init=False)

    def validate(self) -> List[str]:
        issues = []
        if not self.c0 > 0:
            issues.append(f"pluck amplitude c0 must be > 0 (got {self.c0})")
        if not 0 < self.x_p < 1:
            issues.append(f"pluck position must lie in (0, 1) (got {self.x_p})")
        elif not 0 < self.width <= 2 * min(self.x_p, 1 - self.x_p) + 1e-12:
            issues.append(
                f"pluck width must lie in (0, {2 * min(self.x_p, 1 - self.x_p):.4g}] "
                f"for position {self.x_p} (got {self.width})"
            )
        return issues

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "c0": self.c0, "x_p": self.x_p, "width": self.width}


@dataclass(frozen=True)
class BowSpec:
    """
    弓参数
    Bow position, velocity and force as envelopes, the friction curve (a, eps),
    and the active window [start, end).
    """

    x_b: Envelope = field(default_factory=lambda: Envelope.constant(0.12))
    v_b: Envelope = field(default_factory=lambda: Envelope.constant(0.2))
    f_b: Envelope = field(default_factory=lambda: Envelope.constant(50.0))
    a: float = 100.0
    eps: float = 0.0
    start: float = 0.0
    end: float = float("inf")
    kind: ExcitationKind = field(default=ExcitationKind.BOW, init=False)

    def validate(self, duration: float) -> List[str]:
        issues = []
        if self.f_b.minimum() < 0:
            issues.append("bow force F_b must be >= 0 everywhere")
        if not (0 < self.x_b.minimum() and self.x_b.maximum() < 1):
            issues.append("bow position x_b must stay inside (0, 1)")
        if self.a < 0:
            issues.append(f"friction sharpness a must be >= 0 (got {self.a})")
        if not 0 <= self.eps <= 1:
            issues.append(f"friction offset eps must lie in [0, 1] (got {self.eps})")
        if self.end <= self.start:
            issues.append(f"bow end ({self.end}) must come after bow start ({self.start})")
        if self.start < 0 or self.start > duration:
            issues.append(f"bow start must lie in [0, duration] (got {self.start})")
        return issues

    def active_window(self, duration: float) -> Tuple[float, float]:
        return self.start, min(self.end, duration)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "x_b": self.x_b.to_list(),
            "v_b": self.v_b.to_list(),
            "f_b": self.f_b.to_list(),
            "a": self.a,
            "eps": self.eps,
            "start": self.start,
            "end": None if np.isinf(self.end) else self.end,
        }


@dataclass(frozen=True)
class HammerSpec:
    """Strike point, launch state (u_h0 below the string, v_h0 toward it), mass ratio and felt law."""

    x_h: float = 0.12
    u_h0: float = -1e-3
    v_h0: float = 1.0
    mass_ratio: float = 1.0
    omega_h: float = 1000.0
    alpha_h: float = 2.3
    onset: float = 0.0
    kind: ExcitationKind = field(default=ExcitationKind.HAMMER, init=False)

    def validate(self) -> List[str]:
        issues = []
        if not 0 < self.x_h < 1:
            issues.append(f"hammer position must lie in (0, 1) (got {self.x_h})")
        if not self.mass_ratio > 0:
            issues.append(f"hammer mass ratio must be > 0 (got {self.mass_ratio})")
        if not self.omega_h > 0:
            issues.append(f"hammer stiffness omega_h must be > 0 (got {self.omega_h})")
        if not self.alpha_h >= 1:
            issues.append(f"hammer exponent alpha_h must be >= 1 (got {self.alpha_h})")
        if self.onset < 0:
            issues.append(f"hammer onset must be >= 0 (got {self.onset})")
        return issues

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "x_h": self.x_h,
            "u_h0": self.u_h0,
            "v_h0": self.v_h0,
            "mass_ratio": self.mass_ratio,
            "omega_h": self.omega_h,
            "alpha_h": self.alpha_h,
            "onset": self.onset,
        }


ExcitationSpec = Union[PluckSpec, BowSpec, HammerSpec]


def excitation_from_dict(data: Dict[str, Any]) -> ExcitationSpec:
    """
    从字典恢复激励
    Inverse of the specs' ``to_dict``.

    Args:
        data: record with a ``kind`` key; bow envelopes as [[t, v], ...]

    Returns:
        PluckSpec, BowSpec or HammerSpec

    Raises:
        ConfigError: for a missing or unknown kind
    """
    payload = dict(data)
    try:
        kind = ExcitationKind(payload.pop("kind"))
    except (KeyError, ValueError):
        raise ConfigError(f"excitation record without a known kind: {data}")
    if kind is ExcitationKind.PLUCK:
        return PluckSpec(**payload)
    if kind is ExcitationKind.HAMMER:
        return HammerSpec(**payload)
    end = payload.pop("end", None)
    return BowSpec(
        x_b=Envelope.from_list(payload.pop("x_b")),
        v_b=Envelope.from_list(payload.pop("v_b")),
        f_b=Envelope.from_list(payload.pop("f_b")),
        end=float("inf") if end is None else float(end),
        **payload,
    )
