"""Torque-exact feedback linearization of the dq voltage equations.

The torque-rate identity

    tau + mu * dtau/dt = b(i)^T v + phi(i, omega)

holds along any trajectory of the machine.  Applying

    v = b / |b|^2 * (u - phi) + z,     with  b^T z = 0,

therefore turns the torque dynamics into the first-order linear system
tau + mu * dtau/dt = u, with z free to spend the remaining voltage budget
on loss minimization.

Note on b_d: substituting the current dynamics into the torque rate gives
b_d = -(3p/2R) * eta * L_q * i_q.  A published variant of the same
expression carries L_d instead of L_q; it does not satisfy the identity
above for salient machines and is kept here only as a test switch
(``printed_b_d=True``) so the residual check can arbitrate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBError, OrthogonalityViolation
from .machine import torque

__all__ = [
    "EPS_B",
    "TOL_ORTH",
    "LinearizationTerms",
    "compute_terms",
    "linearize",
    "torque_rate_identity_residual",
]

# Below this |b| the torque channel is uncontrollable.
EPS_B = 1e-6
# Relative orthogonality tolerance on b^T z.
TOL_ORTH = 1e-9


@dataclass(frozen=True)
class LinearizationTerms:
    """Torque-channel direction b, drift phi and cached |b|^2 at one state."""

    b: np.ndarray
    phi: float
    b_norm_sq: float


def compute_terms(i, omega, params, printed_b_d=False):
    """Evaluate b(i) and phi(i, omega).

    Raises:
        DegenerateBError: if |b| < EPS_B (torque channel uncontrollable).
    """
    i_d, i_q = i
    p, R, L_d, L_q, psi = params.p, params.R, params.L_d, params.L_q, params.psi
    eta = params.eta
    c = 1.5 * p / R

    if printed_b_d:
        b_d = -c * eta * L_d * i_q
    else:
        b_d = -c * eta * L_q * i_q
    b_q = c * (psi - eta * L_d * i_d)
    b = np.array([b_d, b_q])
    b_norm_sq = b_d * b_d + b_q * b_q
    if b_norm_sq < EPS_B * EPS_B:
        raise DegenerateBError(f"|b| = {np.sqrt(b_norm_sq):.3e} at i = {i}")

    phi = (
        1.5 * p * (omega / R) * (L_q * psi * i_d - eta * L_q**2 * i_q**2 - eta * L_d**2 * i_d**2 - psi**2)
        + 1.5 * p * eta * L_q * i_d * i_q
    )
    return LinearizationTerms(b=b, phi=phi, b_norm_sq=b_norm_sq)


def linearize(u, z, terms):
    """Map auxiliary inputs (u, z) to dq voltages: v = b/|b|^2 (u - phi) + z.

    Raises:
        OrthogonalityViolation: if z is not perpendicular to b within
            TOL_ORTH relative tolerance.
    """
    z = np.asarray(z, dtype=float)
    b = terms.b
    b_dot_z = float(b @ z)
    z_norm = np.linalg.norm(z)
    if abs(b_dot_z) > TOL_ORTH * np.sqrt(terms.b_norm_sq) * z_norm and z_norm > 0.0:
        raise OrthogonalityViolation(f"|b.z| = {abs(b_dot_z):.3e} for |b||z| = {np.sqrt(terms.b_norm_sq) * z_norm:.3e}")
    return b / terms.b_norm_sq * (u - terms.phi) + z


def torque_rate_identity_residual(i_prev, i_curr, i_next, v, omega, dt, params, printed_b_d=False):
    """Residual of tau + mu*dtau/dt - (b^T v + phi) at the middle sample.

    ``i_prev``/``i_next`` are trajectory samples +-dt around ``i_curr`` and
    feed a central finite difference for dtau/dt; ``v`` is the voltage
    applied over the stencil.  Expected ~0 for the authoritative b, phi.
    """
    tau = torque(i_curr, params)
    tau_dot = (torque(i_next, params) - torque(i_prev, params)) / (2.0 * dt)
    terms = compute_terms(i_curr, omega, params, printed_b_d=printed_b_d)
    return (tau + params.mu * tau_dot) - (float(terms.b @ np.asarray(v)) + terms.phi)
