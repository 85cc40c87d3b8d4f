"""Time profiles for reference torque, speed and load torque.

Each profile is a small frozen dataclass callable as ``profile(t)``; the
``kind`` tag and field names round-trip through the scenario config
format.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

__all__ = ["ConstantProfile", "StepProfile", "SinusoidProfile", "TrapezoidProfile", "TableProfile"]


@dataclass(frozen=True)
class ConstantProfile:
    value: float

    kind = "constant"

    def __call__(self, t):
        return self.value


@dataclass(frozen=True)
class StepProfile:
    initial: float
    final: float
    t_step: float

    kind = "step"

    def __call__(self, t):
        return self.final if t >= self.t_step else self.initial


@dataclass(frozen=True)
class SinusoidProfile:
    amplitude: float
    frequency: float  # Hz
    offset: float = 0.0
    phase: float = 0.0  # rad

    kind = "sinusoid"

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase)


@dataclass(frozen=True)
class TrapezoidProfile:
    """Ramp from ``initial`` to ``final`` over [t0, t1], hold, optionally
    ramp back to ``initial`` over [t2, t3]."""

    initial: float
    final: float
    t0: float
    t1: float
    t2: float = np.inf
    t3: float = np.inf

    kind = "trapezoid"

    def __call__(self, t):
        if t <= self.t0:
            return self.initial
        if t < self.t1:
            return self.initial + (self.final - self.initial) * (t - self.t0) / (self.t1 - self.t0)
        if t <= self.t2:
            return self.final
        if t < self.t3:
            return self.final + (self.initial - self.final) * (t - self.t2) / (self.t3 - self.t2)
        return self.initial


@dataclass(frozen=True)
class TableProfile:
    """Piecewise-linear interpolation through (times, values) breakpoints."""

    times: Tuple[float, ...]
    values: Tuple[float, ...]

    kind = "table"

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ValueError("table profile needs matching times/values, at least two points")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("table times must be strictly increasing")

    def __call__(self, t):
        return float(np.interp(t, self.times, self.values))
