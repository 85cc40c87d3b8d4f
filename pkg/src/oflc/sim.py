"""Fixed-step plant simulator, scenario engine and comparison runner.

Two integration modes are provided:

* ``run_scenario``: the realistic discrete drive: the controller runs at
  dt_ctrl, its voltage is held (zero-order hold) while the plant is
  stepped with RK4 at dt_plant.
* ``run_continuous``: the controller is re-evaluated at every RK4 stage,
  i.e. the continuous-time closed loop.  Used for transfer-function and
  linearization-identity checks, which are continuous-time statements
  that zero-order-hold quantization would otherwise dominate.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NonFiniteStateError, ValidationError
from . import machine, optimizer
from .linearization import compute_terms, linearize
from .loop import ControlFrame, TorqueController
from .machine import MachineParams, dq_dynamics, inverse_park_clarke, torque
from .optimizer import SaturationReport

__all__ = [
    "MechanicalModel",
    "Scenario",
    "RunResult",
    "ContinuousRun",
    "rk4_plant_step",
    "run_scenario",
    "run_continuous",
    "energy_accounting",
    "IdZeroController",
    "CONTROLLER_NAMES",
]

CONTROLLER_NAMES = ("oflc", "flc_z0", "id_zero")


@dataclass(frozen=True)
class MechanicalModel:
    """Rigid mechanical load: J dw/dt = tau - tau_load - friction * w.

    Speeds here are mechanical; the electrical speed fed to the machine
    model is p times larger.
    """

    inertia: float  # kg m^2
    friction: float = 0.0  # N m s
    load_torque: Callable[[float], float] = lambda t: 0.0

    def __post_init__(self):
        if self.inertia <= 0.0:
            raise ValueError("inertia must be positive")
        if self.friction < 0.0:
            raise ValueError("friction must be non-negative")


@dataclass(frozen=True)
class Scenario:
    """One simulation run: machine, profiles, rates and limits.

    ``speed`` is the prescribed electrical speed profile (rad/s); set it
    to None and supply ``mechanical`` to let the load dynamics produce
    the speed instead.
    """

    params: MachineParams
    duration: float
    tau_ref: Callable[[float], float]
    speed: Optional[Callable[[float], float]] = None
    mechanical: Optional[MechanicalModel] = None
    dt_plant: float = 1e-6
    dt_ctrl: float = 1e-4
    horizon: float = 1e-3
    v_max: float = 48.0
    i0: Tuple[float, float] = (0.0, 0.0)
    theta0: float = 0.0
    omega0: float = 0.0  # initial mechanical speed, mechanical mode only

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValidationError("duration", "must be positive")
        if self.dt_plant <= 0.0:
            raise ValidationError("dt_plant", "must be positive")
        if self.dt_plant > self.dt_ctrl:
            raise ValidationError("dt_plant", f"must not exceed dt_ctrl ({self.dt_plant} > {self.dt_ctrl})")
        if abs(self.dt_ctrl / self.dt_plant - round(self.dt_ctrl / self.dt_plant)) > 1e-9:
            raise ValidationError("dt_ctrl", "must be an integer multiple of dt_plant")
        if abs(self.duration / self.dt_ctrl - round(self.duration / self.dt_ctrl)) > 1e-6:
            raise ValidationError("duration", "must be an integer multiple of dt_ctrl")
        if self.horizon <= 0.0:
            raise ValidationError("horizon", "must be positive")
        if self.v_max <= 0.0:
            raise ValidationError("v_max", "must be positive")
        if (self.speed is None) == (self.mechanical is None):
            raise ValidationError("speed", "exactly one of speed profile or mechanical model required")


@dataclass
class RunResult:
    """Trace and summary figures of one scenario run."""

    frames: list
    cost_integral: float = 0.0  # int |i|^2 dt, A^2 s
    copper_energy: float = 0.0  # int 3/2 R |i|^2 dt, J
    rms_torque_error: float = 0.0
    saturation_counts: dict = field(default_factory=dict)
    aborted: bool = False


def rk4_plant_step(i, v, omega, dt_plant, params):
    """One classical RK4 step of the current dynamics, v and omega held."""
    k1 = dq_dynamics(i, v, omega, params)
    k2 = dq_dynamics(i + 0.5 * dt_plant * k1, v, omega, params)
    k3 = dq_dynamics(i + 0.5 * dt_plant * k2, v, omega, params)
    k4 = dq_dynamics(i + dt_plant * k3, v, omega, params)
    i_next = i + (dt_plant / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(i_next)):
        raise NonFiniteStateError(f"state diverged: {i_next}")
    return i_next


class IdZeroController:
    """Classical i_d = 0 vector-control baseline.

    Two decoupled PI current loops with feedforward decoupling of the
    cross-coupling and back-EMF terms; reporting context only.
    """

    def __init__(self, params, v_max, dt_ctrl, bandwidth=2000.0):
        self.params = params
        self.v_max = v_max
        self.dt_ctrl = dt_ctrl
        # pole-placement tuning: kp = L wc, ki = R wc
        self.kp_d = params.L_d * bandwidth
        self.kp_q = params.L_q * bandwidth
        self.ki = params.R * bandwidth
        self._integ = np.zeros(2)

    def reset(self):
        self._integ = np.zeros(2)

    def step(self, t, theta, omega, i_abc, tau_ref):
        params = self.params
        i_dq = machine.park_clarke(theta, i_abc, params)
        tau_est = torque(i_dq, params)
        p_copper = 1.5 * params.R * float(i_dq @ i_dq)
        i_ref = np.array([0.0, tau_ref / (1.5 * params.p * params.psi)])
        e = i_ref - i_dq
        integ_next = self._integ + e * self.dt_ctrl
        v_d = self.kp_d * e[0] + self.ki * integ_next[0] - params.L_q * i_dq[1] * omega
        v_q = self.kp_q * e[1] + self.ki * integ_next[1] + params.L_d * i_dq[0] * omega + params.psi * omega
        v_dq = np.array([v_d, v_q])
        v_norm = np.linalg.norm(v_dq)
        clipped = v_norm > self.v_max
        if clipped:
            v_dq = v_dq * (self.v_max / v_norm)
        else:
            self._integ = integ_next  # anti-windup: freeze while clipped
        return ControlFrame(
            t=t, theta=theta, omega=omega, i_dq=i_dq, tau_ref=tau_ref,
            tau_est=tau_est, u_raw=tau_ref, u_feasible=tau_ref,
            lam=np.zeros(2), z=np.zeros(2), v_dq=v_dq,
            v_abc=inverse_park_clarke(theta, v_dq, params),
            report=SaturationReport(u_clamped=clipped, u_raw=tau_ref),
            p_copper=p_copper,
        )


def make_controller(name, scenario, gains=None, alpha_z=1.0):
    """Instantiate one of the named controllers for a scenario."""
    if name == "oflc":
        return TorqueController(scenario.params, scenario.v_max, scenario.dt_ctrl,
                                horizon=scenario.horizon, gains=gains, alpha_z=alpha_z)
    if name == "flc_z0":
        return TorqueController(scenario.params, scenario.v_max, scenario.dt_ctrl,
                                horizon=scenario.horizon, gains=gains, use_z=False)
    if name == "id_zero":
        return IdZeroController(scenario.params, scenario.v_max, scenario.dt_ctrl)
    raise ValueError(f"unknown controller {name!r}; expected one of {CONTROLLER_NAMES}")


def run_scenario(scenario, controller="oflc", gains=None, alpha_z=1.0):
    """Simulate a scenario with zero-order-hold control; deterministic."""
    s = scenario
    params = s.params
    ctrl = controller if hasattr(controller, "step") else make_controller(controller, s, gains=gains, alpha_z=alpha_z)

    n_ctrl = round(s.duration / s.dt_ctrl)
    n_sub = round(s.dt_ctrl / s.dt_plant)
    i = np.array(s.i0, dtype=float)
    theta = s.theta0
    omega_m = s.omega0  # mechanical, mechanical mode only
    frames = []
    aborted = False

    for k in range(n_ctrl):
        t = k * s.dt_ctrl
        if s.speed is not None:
            omega_e = float(s.speed(t))
        else:
            omega_e = params.p * omega_m
        i_abc = inverse_park_clarke(theta, i, params)
        frame = ctrl.step(t, theta, omega_e, i_abc, float(s.tau_ref(t)))
        frames.append(frame)
        try:
            for j in range(n_sub):
                t_sub = t + j * s.dt_plant
                if s.speed is not None:
                    omega_sub = float(s.speed(t_sub))
                    i = rk4_plant_step(i, frame.v_dq, omega_sub, s.dt_plant, params)
                    theta += omega_sub / params.p * s.dt_plant
                else:
                    omega_sub = params.p * omega_m
                    i = rk4_plant_step(i, frame.v_dq, omega_sub, s.dt_plant, params)
                    tau_m = torque(i, params)
                    mech = s.mechanical
                    omega_m += (tau_m - mech.load_torque(t_sub) - mech.friction * omega_m) / mech.inertia * s.dt_plant
                    theta += omega_m * s.dt_plant
        except NonFiniteStateError:
            aborted = True
            break

    result = RunResult(frames=frames, aborted=aborted)
    if frames:
        cost, copper = energy_accounting(frames)
        result.cost_integral = cost
        result.copper_energy = copper
        err = np.array([f.tau_ref - f.tau_est for f in frames])
        result.rms_torque_error = float(np.sqrt(np.mean(err * err)))
    result.saturation_counts = {
        "u_clamped": sum(f.report.u_clamped for f in frames),
        "z_at_limit": sum(f.report.z_at_limit for f in frames),
        "z_zeroed": sum(f.report.z_zeroed for f in frames),
        "b_degenerate": sum(f.report.b_degenerate for f in frames),
        "lambda_fallback": sum(f.report.lambda_fallback for f in frames),
    }
    return result


def energy_accounting(frames):
    """Trapezoidal integrals of |i|^2 and copper power over a trace."""
    t = np.array([f.t for f in frames])
    i_sq = np.array([float(f.i_dq @ f.i_dq) for f in frames])
    p_cu = np.array([f.p_copper for f in frames])
    return float(np.trapezoid(i_sq, t)), float(np.trapezoid(p_cu, t))


def run_open_loop(params, v_fn, omega_fn, i0, duration, dt):
    """Integrate the plant under a prescribed smooth voltage ``v_fn(t)``.

    v is evaluated inside the RK4 stages (no zero-order hold); returns
    (t, i) with i of shape (N+1, 2).  Test utility for trajectory-level
    identities.
    """
    n = round(duration / dt)
    i = np.array(i0, dtype=float)
    ts = np.empty(n + 1)
    states = np.empty((n + 1, 2))
    for k in range(n + 1):
        t = k * dt
        ts[k] = t
        states[k] = i
        if k == n:
            break
        k1 = dq_dynamics(i, v_fn(t), omega_fn(t), params)
        k2 = dq_dynamics(i + 0.5 * dt * k1, v_fn(t + 0.5 * dt), omega_fn(t + 0.5 * dt), params)
        k3 = dq_dynamics(i + 0.5 * dt * k2, v_fn(t + 0.5 * dt), omega_fn(t + 0.5 * dt), params)
        k4 = dq_dynamics(i + dt * k3, v_fn(t + dt), omega_fn(t + dt), params)
        i = i + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(i)):
            raise NonFiniteStateError(f"state diverged at t = {t + dt}")
    return ts, states


@dataclass
class ContinuousRun:
    """Sampled trajectory of a continuous-control closed-loop run."""

    t: np.ndarray
    i: np.ndarray  # (N, 2)
    tau: np.ndarray
    u: np.ndarray  # clamped torque command actually applied at samples
    clamped: np.ndarray  # bool per sample


def run_continuous(params, v_max, u_profile, omega_profile, duration, dt,
                   horizon=1e-3, use_z=True, alpha_z=1.0, i0=(0.0, 0.0),
                   z_smoothing=0.0):
    """Integrate the closed loop with control re-evaluated at every stage.

    ``u_profile(t)`` is the raw torque command (no PI loop) and
    ``omega_profile(t)`` the electrical speed.  Realizes the
    continuous-time behaviour tau + mu dtau/dt = u exactly up to
    integrator error.

    ``z_smoothing`` > 0 replaces the bang-bang magnitude rule
    |z| = z_max with the smooth saturation
    z = -alpha_z z_max d / sqrt(|d|^2 + z_smoothing^2): the exact rule
    makes the closed loop a sliding mode around the loss optimum, which
    a fixed-step integrator cannot resolve; the smoothed z remains
    admissible (z | b, |z| <= z_max), so torque dynamics are unaffected.
    """

    def applied_u(i, t):
        terms = compute_terms(i, omega_profile(t), params)
        u_f, rep = optimizer.clamp_torque_command(float(u_profile(t)), terms, v_max)
        return u_f, rep.u_clamped, terms

    def deriv(i, t):
        omega = float(omega_profile(t))
        u_f, _, terms = applied_u(i, t)
        if use_z:
            z_max = optimizer.z_limit(u_f, terms, v_max)
            B = optimizer.projection(terms.b)
            mats = optimizer.costate_matrices(i, omega, u_f, terms, params)
            lam, _ = optimizer.estimate_costate(i, mats.A, horizon)
            if z_smoothing > 0.0:
                d = B @ (B @ (params.L_inv @ lam))
                z = -alpha_z * z_max * d / np.sqrt(float(d @ d) + z_smoothing**2)
            else:
                z, _ = optimizer.optimal_z(lam, B, params.L_inv, z_max, alpha_z)
        else:
            z = np.zeros(2)
        v = linearize(u_f, z, terms)
        return dq_dynamics(i, v, omega, params)

    n = round(duration / dt)
    i = np.array(i0, dtype=float)
    ts = np.empty(n + 1)
    states = np.empty((n + 1, 2))
    taus = np.empty(n + 1)
    us = np.empty(n + 1)
    clamped = np.empty(n + 1, dtype=bool)
    for k in range(n + 1):
        t = k * dt
        ts[k] = t
        states[k] = i
        taus[k] = torque(i, params)
        u_f, was_clamped, _ = applied_u(i, t)
        us[k] = u_f
        clamped[k] = was_clamped
        if k == n:
            break
        k1 = deriv(i, t)
        k2 = deriv(i + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = deriv(i + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = deriv(i + dt * k3, t + dt)
        i = i + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(i)):
            raise NonFiniteStateError(f"state diverged at t = {t + dt}")
    return ContinuousRun(t=ts, i=states, tau=taus, u=us, clamped=clamped)
