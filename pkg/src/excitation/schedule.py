"""
Which excitations force the string at a given time.
"""

from typing import Sequence, Tuple

from .specs import BowSpec, ExcitationSpec, HammerSpec


def bow_active(spec: BowSpec, t: float) -> bool:
    return spec.start <= t < spec.end and spec.f_b(t) > 0.0


def hammer_active(spec: HammerSpec, t: float) -> bool:
    return t >= spec.onset


def excitation_schedule(excitations: Sequence[ExcitationSpec], t: float) -> Tuple[int, ...]:
    """
    Indices of the excitations that force the string at time t.

    Plucks only set the initial condition and never appear. A bow whose force
    is zero at t is inactive, so it contributes an exact zero.
    """
    active = []
    for index, spec in enumerate(excitations):
        if isinstance(spec, BowSpec) and bow_active(spec, t):
            active.append(index)
        elif isinstance(spec, HammerSpec) and hammer_active(spec, t):
            active.append(index)
    return tuple(active)
