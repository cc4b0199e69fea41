"""9-DoF double-track vehicle model with a fixed-step RK4 integrator.

State layout (14 entries, canonical array order):

    0  x         ground-frame position [m]
    1  y         ground-frame position [m]
    2  psi       yaw [rad]
    3  theta     roll [rad]
    4  phi       pitch [rad]
    5  vx        body-frame longitudinal speed [m/s]
    6  vy        body-frame lateral speed [m/s]
    7  psi_dot   yaw rate [rad/s]
    8  theta_dot roll rate [rad/s]
    9  phi_dot   pitch rate [rad/s]
    10..13 omega wheel spin speeds fl, fr, rl, rr [rad/s]

Controls are [t_fl, t_fr, t_rl, t_rr, delta]: four wheel torques [N m] and
the front steering angle [rad].

The derivative core is vectorized over a leading batch axis; a single
vehicle is the special case batch=1. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import VehicleParams
from .tires import (
    EPS_SPEED,
    _project_forces,
    _suspension_fz,
    contact_velocities,
    slip_angles_from_velocities,
    slip_ratio,
    tire_forces,
)

STATE_DIM = 14
CONTROL_DIM = 5
STATE_FIELDS = (
    "x", "y", "psi", "theta", "phi", "vx", "vy",
    "psi_dot", "theta_dot", "phi_dot",
    "omega_fl", "omega_fr", "omega_rl", "omega_rr",
)

_FRONT_MASK = np.array([1.0, 1.0, 0.0, 0.0])


class SimulationError(RuntimeError):
    """Raised when the model produces an invalid state."""


@dataclass
class VehicleState:
    """Full 9-DoF state; omega is ordered fl, fr, rl, rr."""

    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    theta: float = 0.0
    phi: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    psi_dot: float = 0.0
    theta_dot: float = 0.0
    phi_dot: float = 0.0
    omega: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([
            self.x, self.y, self.psi, self.theta, self.phi,
            self.vx, self.vy, self.psi_dot, self.theta_dot, self.phi_dot,
            *self.omega,
        ])

    @classmethod
    def from_array(cls, arr) -> "VehicleState":
        arr = np.asarray(arr, dtype=float)
        return cls(*arr[:10].tolist(), omega=tuple(arr[10:14].tolist()))


@dataclass
class ControlInput:
    """Constant actuation: wheel torques (fl, fr, rl, rr) and steering."""

    torques: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    delta: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([*self.torques, self.delta])

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        arr = np.asarray(arr, dtype=float)
        return cls(torques=tuple(arr[:4].tolist()), delta=float(arr[4]))


@dataclass
class TireOutput:
    """Per-wheel tire quantities, each an array of shape (4,)."""

    f_xp: np.ndarray
    f_yp: np.ndarray
    f_x: np.ndarray
    f_y: np.ndarray
    f_z: np.ndarray
    tau_x: np.ndarray
    alpha: np.ndarray
    v_xp: np.ndarray


def _wheel_forces(state2d, control2d, params):
    """Slips, normal loads and tire forces for a (B, 14) state batch."""
    vx = state2d[:, 5]
    vy = state2d[:, 6]
    psi_dot = state2d[:, 7]
    omega = state2d[:, 10:14]
    batch = state2d.shape[0]
    delta = control2d[:, 4]
    delta_wheel = delta[:, None] * _FRONT_MASK
    cos_d = np.ones((batch, 4))
    sin_d = np.zeros((batch, 4))
    cos_d[:, 0:2] = np.cos(delta)[:, None]
    sin_d[:, 0:2] = np.sin(delta)[:, None]
    vcx, vcy = contact_velocities(vx, vy, psi_dot, params)
    v_xp = vcx * cos_d + vcy * sin_d
    tau = slip_ratio(omega, v_xp, params.r_eff)
    alpha = slip_angles_from_velocities(vcx, vcy, delta_wheel)
    sin_t, cos_t = np.sin(state2d[:, 3]), np.cos(state2d[:, 3])
    sin_p, cos_p = np.sin(state2d[:, 4]), np.cos(state2d[:, 4])
    fz = _suspension_fz(sin_t, cos_t, sin_p, cos_p,
                        state2d[:, 8], state2d[:, 9], params)
    fxp, fyp = tire_forces(tau, alpha, fz, params.mu, params.tire)
    trig = (cos_d, sin_d, sin_t, cos_t, sin_p, cos_p)
    return delta_wheel, v_xp, tau, alpha, fz, fxp, fyp, trig


def derivatives_batch(state2d: np.ndarray, control2d: np.ndarray,
                      params: VehicleParams) -> np.ndarray:
    """Time derivative of a (B, 14) state batch under (B, 5) controls."""
    _, _, _, _, fz, fxp, fyp, trig = _wheel_forces(state2d, control2d, params)
    fx, fy = _project_forces(fxp, fyp, fz, *trig)

    vx = state2d[:, 5]
    vy = state2d[:, 6]
    psi = state2d[:, 2]
    psi_dot = state2d[:, 7]
    sum_fx = fx.sum(axis=1)
    sum_fy = fy.sum(axis=1)
    f_aero = 0.5 * params.rho_air * params.c_drag * params.frontal_area * vx * vx

    out = np.empty_like(state2d)
    cos_psi, sin_psi = np.cos(psi), np.sin(psi)
    out[:, 0] = vx * cos_psi - vy * sin_psi
    out[:, 1] = vx * sin_psi + vy * cos_psi
    out[:, 2] = psi_dot
    out[:, 3] = state2d[:, 8]
    out[:, 4] = state2d[:, 9]
    out[:, 5] = psi_dot * vy + (sum_fx - f_aero) / params.mass
    out[:, 6] = -psi_dot * vx + sum_fy / params.mass
    out[:, 7] = (params.l_f * (fy[:, 0] + fy[:, 1])
                 - params.l_r * (fy[:, 2] + fy[:, 3])
                 + params.l_w * ((fx[:, 1] - fx[:, 0]) + (fx[:, 3] - fx[:, 2]))
                 ) / params.i_z
    out[:, 8] = (params.l_w * ((fz[:, 0] - fz[:, 1]) + (fz[:, 2] - fz[:, 3]))
                 + params.h_cg * sum_fy) / params.i_x
    out[:, 9] = (params.l_r * (fz[:, 2] + fz[:, 3])
                 - params.l_f * (fz[:, 0] + fz[:, 1])
                 - params.h_cg * sum_fx) / params.i_y
    out[:, 10:14] = (control2d[:, 0:4] - params.r_eff * fxp) / params.i_r
    return out


def derivatives(state: VehicleState | np.ndarray, control: ControlInput | np.ndarray,
                params: VehicleParams) -> np.ndarray:
    """Single-vehicle state derivative, shape (14,), STATE_FIELDS order."""
    s = state.as_array() if isinstance(state, VehicleState) else np.asarray(state, dtype=float)
    c = control.as_array() if isinstance(control, ControlInput) else np.asarray(control, dtype=float)
    out = derivatives_batch(s[None, :], c[None, :], params)[0]
    if not np.all(np.isfinite(out)):
        raise SimulationError("non-finite state derivative")
    return out


def wheel_diagnostics(state, control, params: VehicleParams) -> TireOutput:
    """Per-wheel slips and forces for a single state, for inspection/tests."""
    s = state.as_array() if isinstance(state, VehicleState) else np.asarray(state, dtype=float)
    c = control.as_array() if isinstance(control, ControlInput) else np.asarray(control, dtype=float)
    _, v_xp, tau, alpha, fz, fxp, fyp, trig = _wheel_forces(s[None, :], c[None, :], params)
    fx, fy = _project_forces(fxp, fyp, fz, *trig)
    return TireOutput(f_xp=fxp[0], f_yp=fyp[0], f_x=fx[0], f_y=fy[0], f_z=fz[0],
                      tau_x=tau[0], alpha=alpha[0], v_xp=v_xp[0])


def rk4_step(state2d, control2d, params, dt):
    k1 = derivatives_batch(state2d, control2d, params)
    k2 = derivatives_batch(state2d + 0.5 * dt * k1, control2d, params)
    k3 = derivatives_batch(state2d + 0.5 * dt * k2, control2d, params)
    k4 = derivatives_batch(state2d + dt * k3, control2d, params)
    return state2d + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Placeholder state swapped in for lanes that left the validity envelope so
# that the remaining lockstep arithmetic stays finite.
_PARKED = np.zeros(STATE_DIM)
_PARKED[5] = 5.0


def rollout_batch(states0: np.ndarray, controls: np.ndarray, params: VehicleParams,
                  duration: float = 3.0, dt: float = 1e-3, sample_dt: float = 1e-2):
    """Integrate a batch of constant-control rollouts in lockstep.

    Returns (times, history, alive): history has shape (B, n_samples, 14)
    with n_samples = duration/sample_dt + 1 (the initial state included);
    alive marks lanes that kept |vx| >= EPS_SPEED and stayed finite. Dead
    lanes hold garbage after their failure point and must be discarded.
    """
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    stride = sample_dt / dt
    if abs(stride - round(stride)) > 1e-9:
        raise ValueError("sample_dt must be an integer multiple of dt")
    stride = int(round(stride))
    n_steps = int(round(duration / dt))
    if abs(n_steps * dt - duration) > 1e-9:
        raise ValueError("duration must be an integer multiple of dt")
    n_samples = n_steps // stride + 1

    state = np.array(states0, dtype=float)
    batch = state.shape[0]
    alive = np.ones(batch, dtype=bool)
    history = np.zeros((batch, n_samples, STATE_DIM))
    history[:, 0] = state
    times = np.arange(n_samples) * sample_dt

    with np.errstate(all="ignore"):
        for step in range(1, n_steps + 1):
            state = rk4_step(state, controls, params, dt)
            bad = alive & (~np.all(np.isfinite(state), axis=1)
                           | (np.abs(state[:, 5]) < EPS_SPEED))
            if bad.any():
                alive &= ~bad
                state[bad] = _PARKED
            if step % stride == 0:
                history[:, step // stride] = state
    return times, history, alive


@dataclass
class Rollout:
    """Sampled trajectory of one constant-control simulation."""

    times: np.ndarray      # (S,)
    states: np.ndarray     # (S, 14)

    @property
    def xy(self) -> np.ndarray:
        return self.states[:, 0:2]


def simulate_rollout(state0, control, params: VehicleParams,
                     duration: float = 3.0, dt: float = 1e-3,
                     sample_dt: float = 1e-2) -> Rollout:
    """Fixed-step RK4 rollout of a single vehicle under constant control.

    Raises SimulationError with the offending time stamp if the state
    leaves the model's validity envelope (|vx| < EPS_SPEED or non-finite).
    """
    s = state0.as_array() if isinstance(state0, VehicleState) else np.asarray(state0, dtype=float)
    c = control.as_array() if isinstance(control, ControlInput) else np.asarray(control, dtype=float)
    times, history, alive = rollout_batch(s[None, :], c[None, :], params,
                                          duration=duration, dt=dt, sample_dt=sample_dt)
    if not alive[0]:
        states = history[0]
        finite = np.all(np.isfinite(states), axis=1) & (np.abs(states[:, 5]) >= EPS_SPEED)
        first_bad = int(np.argmin(finite)) if not finite.all() else len(times) - 1
        raise SimulationError(
            f"state left validity envelope near t={times[first_bad]:.3f} s")
    return Rollout(times=times, states=history[0])


def zero_slip_wheel_speeds(vx: float, vy: float, delta: float,
                           params: VehicleParams) -> np.ndarray:
    """Wheel speeds giving exactly zero slip ratio at zero yaw rate."""
    front = (vx * np.cos(delta) + vy * np.sin(delta)) / params.r_eff
    rear = vx / params.r_eff
    return np.array([front, front, rear, rear])
