"""Decoupled reference controllers: pure pursuit / Stanley steering plus a
PI speed loop.

These follow the conventional kinematic formulations and are evaluated at a
high rate (every 10 ms); all functions are pure given the explicitly passed
PiState.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import VehicleParams
from .track import DivergenceError, ReferencePath, nearest_path_point

STEERING_LIMIT = 0.5
# Per-wheel torque envelope matching the training data actuation pattern.
MAX_DRIVE_TORQUE = 750.0
MAX_BRAKE_TORQUE = 1250.0


@dataclass
class PiGains:
    k_p: float = 600.0
    k_i: float = 10.0
    windup_torque: float = 1250.0   # bound on the integral torque share


@dataclass
class PiState:
    gains: PiGains
    integral: float = 0.0           # accumulated speed error [m/s * s]

    def reset(self) -> None:
        self.integral = 0.0


@dataclass
class LateralGains:
    stanley_k: float = 0.75
    anticipation_time: float = 1.5  # preview scaling T_A [s]

    def __post_init__(self):
        if self.stanley_k <= 0 or self.anticipation_time <= 0:
            raise ValueError("lateral gains must be positive")


def pi_longitudinal(v_ref: float, v: float, state: PiState, dt: float) -> float:
    """Total torque command K_P e + K_I int(e); integral is anti-windup
    clamped so its torque share stays within +-windup_torque."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    gains = state.gains
    error = v_ref - v
    bound = gains.windup_torque / gains.k_i
    state.integral = float(np.clip(state.integral + error * dt, -bound, bound))
    return gains.k_p * error + gains.k_i * state.integral


def split_torque(total: float) -> np.ndarray:
    """Positive demand on the front axle, negative on all four wheels."""
    if total >= 0.0:
        per_wheel = min(total / 2.0, MAX_DRIVE_TORQUE)
        return np.array([per_wheel, per_wheel, 0.0, 0.0])
    per_wheel = max(total / 4.0, -MAX_BRAKE_TORQUE)
    return np.array([per_wheel, per_wheel, per_wheel, per_wheel])


def _wrap_angle(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def pure_pursuit(state: np.ndarray, path: ReferencePath, params: VehicleParams,
                 gains: LateralGains) -> float:
    """Rear-axle pure pursuit with speed-scaled preview L_P = l_f + T_A V_g."""
    psi = state[2]
    v_g = math.hypot(state[5], state[6])
    preview = params.l_f + gains.anticipation_time * v_g
    rear = state[0:2] - params.l_r * np.array([math.cos(psi), math.sin(psi)])
    here = nearest_path_point(path, rear)
    s_goal = here.s + preview
    if not path.closed and s_goal > path.length + 1e-9:
        raise DivergenceError("no goal point at preview distance")
    goal = path.point_at(s_goal)
    to_goal = goal - rear
    dist = float(np.linalg.norm(to_goal))
    if dist < 1e-9:
        return 0.0
    bearing = _wrap_angle(math.atan2(to_goal[1], to_goal[0]) - psi)
    curvature = 2.0 * math.sin(bearing) / dist
    delta = math.atan(params.wheelbase * curvature)
    return float(np.clip(delta, -STEERING_LIMIT, STEERING_LIMIT))


def stanley(state: np.ndarray, path: ReferencePath, gains: LateralGains,
            params: VehicleParams) -> float:
    """delta = heading error + atan(k e_front / V_g), with e_front the
    front-axle lateral offset of the path (positive when the path lies to
    the left of the axle)."""
    psi = state[2]
    v_g = max(math.hypot(state[5], state[6]), 1e-3)
    front = state[0:2] + params.l_f * np.array([math.cos(psi), math.sin(psi)])
    here = nearest_path_point(path, front)
    heading_error = _wrap_angle(here.heading - psi)
    e_front = -here.lateral
    delta = heading_error + math.atan(gains.stanley_k * e_front / v_g)
    return float(np.clip(delta, -STEERING_LIMIT, STEERING_LIMIT))
