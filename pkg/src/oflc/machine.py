"""dq-frame electrical model of a salient-pole PM synchronous machine.

Conventions used throughout the package:

* current and voltage vectors are numpy arrays ordered ``[d, q]``;
* ``theta`` is the mechanical shaft angle in radians; the transforms use
  the electrical angle ``p * theta``;
* ``omega`` is the electrical-frame speed in rad/s (the speed that
  multiplies the cross-coupling and back-EMF terms of the voltage
  equations).  Mechanical speed is ``omega / p``.

All functions here are pure and safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MachineParams",
    "park_matrix",
    "inverse_park_matrix",
    "park_clarke",
    "inverse_park_clarke",
    "torque",
    "dq_dynamics",
    "h_vector",
]

_TWO_THIRDS_PI = 2.0 * np.pi / 3.0


@dataclass(frozen=True)
class MachineParams:
    """Electrical constants of the machine.

    Attributes:
        R: stator resistance (ohm)
        L_d: d-axis inductance (henry)
        L_q: q-axis inductance (henry)
        psi: permanent-magnet flux linkage / back-EMF constant (weber)
        p: pole pairs
    """

    R: float
    L_d: float
    L_q: float
    psi: float
    p: int

    def __post_init__(self):
        if not self.R > 0.0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not self.L_d > 0.0:
            raise ValueError(f"L_d must be positive, got {self.L_d}")
        if not self.L_q > 0.0:
            raise ValueError(f"L_q must be positive, got {self.L_q}")
        if not self.psi > 0.0:
            raise ValueError(f"psi must be positive, got {self.psi}")
        if not (isinstance(self.p, (int, np.integer)) and self.p >= 1):
            raise ValueError(f"p must be a positive integer, got {self.p}")

    @property
    def eta(self):
        """Inductance ratio L_q/L_d - 1 (zero for a non-salient machine)."""
        return self.L_q / self.L_d - 1.0

    @property
    def mu(self):
        """Machine time constant L_q/R in seconds."""
        return self.L_q / self.R

    @property
    def L(self):
        """Inductance matrix diag(L_d, L_q)."""
        return np.diag([self.L_d, self.L_q])

    @property
    def L_inv(self):
        """Inverse inductance matrix diag(1/L_d, 1/L_q)."""
        return np.diag([1.0 / self.L_d, 1.0 / self.L_q])


def park_matrix(theta, p):
    """2x3 transform from phase quantities to the rotating dq frame."""
    a = p * theta
    return (2.0 / 3.0) * np.array(
        [
            [np.cos(a), np.cos(a - _TWO_THIRDS_PI), np.cos(a + _TWO_THIRDS_PI)],
            [np.sin(a), np.sin(a - _TWO_THIRDS_PI), np.sin(a + _TWO_THIRDS_PI)],
        ]
    )


def inverse_park_matrix(theta, p):
    """3x2 transform from the dq frame back to phase quantities."""
    a = p * theta
    return np.array(
        [
            [np.cos(a), np.sin(a)],
            [np.cos(a - _TWO_THIRDS_PI), np.sin(a - _TWO_THIRDS_PI)],
            [np.cos(a + _TWO_THIRDS_PI), np.sin(a + _TWO_THIRDS_PI)],
        ]
    )


def park_clarke(theta, abc, params):
    """Map per-phase quantities (a, b, c) to the dq pair [d, q]."""
    return park_matrix(theta, params.p) @ np.asarray(abc, dtype=float)


def inverse_park_clarke(theta, dq, params):
    """Map a dq pair [d, q] to per-phase quantities (a, b, c)."""
    return inverse_park_matrix(theta, params.p) @ np.asarray(dq, dtype=float)


def torque(i, params):
    """Electromagnetic torque (N*m) at dq currents ``i = [i_d, i_q]``."""
    i_d, i_q = i
    return 1.5 * params.p * (params.psi * i_q + (params.L_d - params.L_q) * i_d * i_q)


def dq_dynamics(i, v, omega, params):
    """Current derivatives d[i_d, i_q]/dt under voltages v at speed omega."""
    i_d, i_q = i
    v_d, v_q = v
    did = (-params.R * i_d + params.L_q * i_q * omega + v_d) / params.L_d
    diq = (-params.R * i_q + params.L_d * i_d * omega - params.psi * omega + v_q) / params.L_q
    return np.array([did, diq])


def h_vector(i, omega, params):
    """Drift term of the voltage equations: L di/dt = h(i, omega) + v."""
    i_d, i_q = i
    return np.array(
        [
            -params.R * i_d + params.L_q * i_q * omega,
            -params.R * i_q + params.L_d * i_d * omega - params.psi * omega,
        ]
    )
