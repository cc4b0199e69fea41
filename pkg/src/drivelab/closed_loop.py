"""Closed-loop track evaluation of learned and conventional controllers.

The vehicle is integrated at 1 ms; the active controller is re-invoked at
its own period (300 ms for network controllers, 10 ms for the decoupled
baselines) and its command held constant in between (zero-order hold).
Speed and signed lateral error are recorded every 10 ms together with the
applied commands; a run ends on lap completion, on divergence (lateral
error above 10 m, speed below 0.5 m/s, or leaving the path neighborhood)
or at the safety time limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    LateralGains,
    MAX_BRAKE_TORQUE,
    MAX_DRIVE_TORQUE,
    PiGains,
    PiState,
    STEERING_LIMIT,
    pi_longitudinal,
    pure_pursuit,
    split_torque,
    stanley,
)
from .bezier import HORIZON, build_bezier_query
from .dynamics import VehicleState, rk4_step, zero_slip_wheel_speeds
from .net.training import OUTPUT_SCALE, state_features
from .params import VehicleParams
from .track import DivergenceError, ReferencePath, nearest_path_point

SIM_DT = 1e-3
RECORD_DT = 1e-2


@dataclass
class ClosedLoopConfig:
    control_period: float = 0.3      # network controller period [s]
    horizon: float = HORIZON         # query horizon [s]
    steering_clamp: float = STEERING_LIMIT
    torque_clamp: float | None = None
    max_time: float = 180.0          # safety cap [s]
    divergence_lateral: float = 10.0
    min_speed: float = 0.5

    def __post_init__(self):
        ratio = self.control_period / SIM_DT
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control period must be a multiple of the sim step")


@dataclass
class SignalStats:
    rms: float
    mean: float
    std: float
    max_signed: float     # largest magnitude, sign preserved

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "SignalStats":
        values = np.asarray(values, dtype=float)
        if len(values) == 0:
            return cls(rms=0.0, mean=0.0, std=0.0, max_signed=0.0)
        peak = values[np.argmax(np.abs(values))]
        return cls(rms=float(np.sqrt(np.mean(values ** 2))),
                   mean=float(np.mean(values)),
                   std=float(np.std(values)),
                   max_signed=float(peak))


@dataclass
class TrackingMetrics:
    controller: str
    completed: bool
    diverged: bool
    reason: str
    sim_time: float
    speed_error: SignalStats
    lateral_error: SignalStats
    section_speed: dict[int, SignalStats]
    section_lateral: dict[int, SignalStats]
    traces: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


class NNController:
    """Wraps a trained model checkpoint as a trajectory-query controller."""

    name = "nn"

    def __init__(self, result, cfg: ClosedLoopConfig, label: str | None = None):
        self.model = result.model
        self.norm = result.norm
        self.cfg = cfg
        self.period = cfg.control_period
        self.name = label or result.model.kind

    def reset(self) -> None:
        pass

    def __call__(self, state: np.ndarray, path: ReferencePath, t: float) -> np.ndarray:
        query = build_bezier_query(state, path, horizon=self.cfg.horizon)
        feats = np.concatenate([
            state_features(state[None, :], self.norm)[0],
            query.samples_body[:, 0] / self.norm.position_scale,
            query.samples_body[:, 1] / self.norm.position_scale,
        ])
        out = self.model.forward(feats[None, :])[0] * OUTPUT_SCALE
        if not np.all(np.isfinite(out)):
            raise DivergenceError(f"non-finite network output at t={t:.3f} s")
        control = np.empty(5)
        # commands outside the training actuation envelope are extrapolation
        # artifacts; clip to the range the dataset controls live in
        control[0:4] = np.clip(out[0:4], -MAX_BRAKE_TORQUE, MAX_DRIVE_TORQUE)
        if self.cfg.torque_clamp is not None:
            control[0:4] = np.clip(control[0:4], -self.cfg.torque_clamp,
                                   self.cfg.torque_clamp)
        control[4] = np.clip(out[4], -self.cfg.steering_clamp, self.cfg.steering_clamp)
        return control


class BaselineController:
    """Pure pursuit or Stanley steering with a PI speed loop at 10 ms."""

    def __init__(self, kind: str, params: VehicleParams,
                 lateral: LateralGains | None = None,
                 pi: PiGains | None = None, period: float = RECORD_DT):
        if kind not in ("pp", "stanley"):
            raise ValueError("baseline kind must be 'pp' or 'stanley'")
        self.kind = kind
        self.name = kind
        self.params = params
        self.lateral = lateral or LateralGains()
        self.pi_state = PiState(gains=pi or PiGains())
        self.period = period

    def reset(self) -> None:
        self.pi_state.reset()

    def __call__(self, state: np.ndarray, path: ReferencePath, t: float) -> np.ndarray:
        v_g = math.hypot(state[5], state[6])
        total = pi_longitudinal(path.v_ref, v_g, self.pi_state, self.period)
        torques = split_torque(total)
        if self.kind == "pp":
            delta = pure_pursuit(state, path, self.params, self.lateral)
        else:
            delta = stanley(state, path, self.lateral, self.params)
        return np.array([*torques, delta])


class ReplayController:
    """Replays a fixed control; used by the self-consistency harness."""

    name = "replay"

    def __init__(self, control: np.ndarray, period: float = 0.3):
        self.control = np.asarray(control, dtype=float)
        self.period = period

    def reset(self) -> None:
        pass

    def __call__(self, state, path, t) -> np.ndarray:
        return self.control


def initial_state_on_path(path: ReferencePath, params: VehicleParams) -> np.ndarray:
    """Zero-slip state at the path start, heading along it at v_ref."""
    state = VehicleState(
        x=float(path.xy[0, 0]), y=float(path.xy[0, 1]),
        psi=float(path.heading[0]), vx=path.v_ref,
        omega=tuple(zero_slip_wheel_speeds(path.v_ref, 0.0, 0.0, params).tolist()),
    )
    return state.as_array()


def closed_loop_simulate(controller, path: ReferencePath, cfg: ClosedLoopConfig,
                         params: VehicleParams,
                         state0: np.ndarray | None = None) -> TrackingMetrics:
    """Run one controller around the track and summarize tracking quality."""
    controller.reset()
    state = np.array(initial_state_on_path(path, params) if state0 is None else state0,
                     dtype=float)

    period_steps = int(round(controller.period / SIM_DT))
    record_steps = int(round(RECORD_DT / SIM_DT))
    n_steps = int(round(cfg.max_time / SIM_DT))

    t_rec, s_rec, xy_rec, v_rec = [], [], [], []
    lat_rec, sec_rec, cmd_rec = [], [], []
    completed = False
    diverged = False
    reason = ""
    progress = 0.0
    s_prev: float | None = None
    control = np.zeros(5)
    state2d = state[None, :]
    control2d = control[None, :]

    def record_and_check(t: float) -> bool:
        """Append one record; True when the run should stop."""
        nonlocal completed, diverged, reason, progress, s_prev
        here = nearest_path_point(path, state2d[0, 0:2])
        v_g = math.hypot(state2d[0, 5], state2d[0, 6])
        t_rec.append(t)
        s_rec.append(here.s)
        xy_rec.append(state2d[0, 0:2].copy())
        v_rec.append(v_g)
        lat_rec.append(here.lateral)
        sec_rec.append(here.section)
        cmd_rec.append(control2d[0].copy())
        ds = here.s - (s_prev if s_prev is not None else here.s)
        if path.closed:
            if ds < -path.length / 2.0:
                ds += path.length
            elif ds > path.length / 2.0:
                ds -= path.length
        s_prev = here.s
        progress += ds
        if abs(here.lateral) > cfg.divergence_lateral:
            diverged, reason = True, "lateral error above limit"
            return True
        if v_g < cfg.min_speed:
            diverged, reason = True, "speed below limit"
            return True
        if progress >= path.length - 0.5:
            completed, reason = True, "lap completed"
            return True
        return False

    try:
        control2d[0] = controller(state2d[0], path, 0.0)
        stop = record_and_check(0.0)
        step = 0
        while not stop and step < n_steps:
            state2d = rk4_step(state2d, control2d, params, SIM_DT)
            if not np.all(np.isfinite(state2d)):
                diverged, reason = True, "non-finite state"
                break
            step += 1
            if step % period_steps == 0:
                control2d[0] = controller(state2d[0], path, step * SIM_DT)
            if step % record_steps == 0:
                stop = record_and_check(step * SIM_DT)
        if not stop and not diverged and not completed:
            diverged, reason = True, "time limit reached"
    except DivergenceError as exc:
        diverged, reason = True, str(exc)

    sections = np.asarray(sec_rec, dtype=int)
    v = np.asarray(v_rec)
    lat = np.asarray(lat_rec)
    speed_err = v - path.v_ref
    per_sec_speed = {int(k): SignalStats.from_samples(speed_err[sections == k])
                     for k in np.unique(sections)}
    per_sec_lat = {int(k): SignalStats.from_samples(lat[sections == k])
                   for k in np.unique(sections)}
    cmds = np.asarray(cmd_rec) if cmd_rec else np.zeros((0, 5))
    return TrackingMetrics(
        controller=getattr(controller, "name", "controller"),
        completed=completed, diverged=diverged, reason=reason,
        sim_time=float(t_rec[-1]) if t_rec else 0.0,
        speed_error=SignalStats.from_samples(speed_err),
        lateral_error=SignalStats.from_samples(lat),
        section_speed=per_sec_speed, section_lateral=per_sec_lat,
        traces={
            "t": np.asarray(t_rec), "s": np.asarray(s_rec),
            "xy": np.asarray(xy_rec) if xy_rec else np.zeros((0, 2)),
            "v": v, "lateral": lat, "commands": cmds,
        },
    )
