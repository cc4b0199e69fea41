"""Feature pipeline, training loop and layer-size grid search.

Network input layout (any change is a format version bump):
11 state features (vx, vy, psi_dot, theta, phi, theta_dot, phi_dot,
omega fl/fr/rl/rr) followed by the 301 trajectory X values and the 301
trajectory Y values, all divided by the fixed constants in Normalization.
The network output is scaled by OUTPUT_SCALE to obtain physical controls
(torques stay O(1) inside the net, which keeps Xavier-initialized output
layers trainable); the loss is evaluated on the physical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset
from ..params import VehicleParams
from ..rng import CounterRng, stream_seed
from .loss import LossConfig, control_loss, data_loss_grad
from .models import CnnSpec, DEFAULT_HIDDEN, MlpSpec, build_model, weight_sq_sum
from .optim import AdamState, adam_step

# Physical scale of each network output: four torques and the steering angle.
OUTPUT_SCALE = np.array([2000.0, 2000.0, 2000.0, 2000.0, 0.5])

# Column indices of the 11 state features in the canonical 14-entry state.
_STATE_COLS = [5, 6, 7, 3, 4, 8, 9, 10, 11, 12, 13]


class TrainingError(RuntimeError):
    pass


@dataclass
class Normalization:
    """Fixed input scaling constants, recorded in every checkpoint."""

    speed_scale: float = 40.0
    angle_scale: float = 0.5
    wheel_scale: float = 40.0 / 0.3
    position_scale: float = 120.0

    @classmethod
    def for_params(cls, params: VehicleParams) -> "Normalization":
        return cls(wheel_scale=40.0 / params.r_eff)

    def state_divisors(self) -> np.ndarray:
        return np.array([self.speed_scale, self.speed_scale]
                        + [self.angle_scale] * 5 + [self.wheel_scale] * 4)

    def to_dict(self) -> dict:
        return {"speed_scale": self.speed_scale, "angle_scale": self.angle_scale,
                "wheel_scale": self.wheel_scale, "position_scale": self.position_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(**d)


def state_features(states: np.ndarray, norm: Normalization) -> np.ndarray:
    """(B, 14) canonical states -> (B, 11) normalized feature rows."""
    return states[:, _STATE_COLS] / norm.state_divisors()


def build_features(dataset: Dataset, norm: Normalization) -> tuple[np.ndarray, np.ndarray]:
    """Returns (features (n, 613), targets (n, 5))."""
    n = dataset.n
    feats = np.empty((n, 11 + 2 * dataset.traj.shape[1]))
    feats[:, :11] = state_features(dataset.states0, norm)
    feats[:, 11:11 + dataset.traj.shape[1]] = dataset.traj[:, :, 0] / norm.position_scale
    feats[:, 11 + dataset.traj.shape[1]:] = dataset.traj[:, :, 1] / norm.position_scale
    return feats, dataset.controls.copy()


def gradients(model, feats: np.ndarray, targets: np.ndarray, cfg: LossConfig,
              ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact reverse-mode gradients of the batch loss (L2 included)."""
    if feats.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    out, cache = model.forward_trace(feats)
    pred = out * OUTPUT_SCALE
    wsq = weight_sq_sum(model)
    loss = control_loss(pred, targets, wsq, cfg)
    dout = data_loss_grad(pred, targets, cfg) * OUTPUT_SCALE
    grads = model.backward(cache, dout)
    for name, value in model.params.items():
        if name.endswith(".w"):
            grads[name] = grads[name] + 2.0 * cfg.gamma_reg * value
    return loss, grads


def evaluate_loss(model, feats: np.ndarray, targets: np.ndarray, cfg: LossConfig,
                  chunk: int = 4096) -> float:
    """Full training objective over a dataset split, evaluated in chunks."""
    n = feats.shape[0]
    if n == 0:
        raise ValueError("empty evaluation split")
    err_delta = 0.0
    err_torque = np.zeros(4)
    for lo in range(0, n, chunk):
        pred = model.forward(feats[lo:lo + chunk]) * OUTPUT_SCALE
        err = pred - targets[lo:lo + chunk]
        err_delta += float(np.sum(err[:, 4] ** 2))
        err_torque += np.sum(err[:, 0:4] ** 2, axis=0)
    l_delta = cfg.steering_scale * err_delta / n
    l_torque = cfg.torque_scale * float(np.sum(err_torque)) / n
    return (cfg.gamma * l_delta + (1.0 - cfg.gamma) * l_torque
            + cfg.gamma_reg * weight_sq_sum(model))


@dataclass
class TrainResult:
    model: object
    adam: AdamState
    norm: Normalization
    loss_cfg: LossConfig
    curve: list[tuple[float, float]] = field(default_factory=list)  # (train, test)
    seed: int = 0
    epochs: int = 0
    batch_size: int = 32


def make_spec(kind: str, hidden: tuple[int, ...] = DEFAULT_HIDDEN,
              signal_len: int = 301, state_dim: int = 11):
    if kind == "mlp":
        return MlpSpec(input_dim=state_dim + 2 * signal_len, hidden=tuple(hidden))
    if kind == "cnn":
        return CnnSpec(state_dim=state_dim, signal_len=signal_len, hidden=tuple(hidden))
    raise ValueError(f"unknown model kind {kind!r}")


def train(kind: str, dataset: Dataset, epochs: int = 200, batch_size: int = 32,
          seed: int = 0, hidden: tuple[int, ...] = DEFAULT_HIDDEN,
          params: VehicleParams | None = None,
          loss_cfg: LossConfig | None = None,
          log=None) -> TrainResult:
    """Train one model; deterministic for a fixed seed.

    Stream 0 of the seed initializes the weights, stream 1+k shuffles
    epoch k. Every epoch records (mean train batch loss, test loss).
    """
    if dataset.n_train < 1:
        raise TrainingError("dataset has no training instances")
    params = params or VehicleParams()
    loss_cfg = loss_cfg or LossConfig()
    norm = Normalization.for_params(params)
    feats, targets = build_features(dataset, norm)
    tr = slice(0, dataset.n_train)
    te = slice(dataset.n_train, dataset.n)

    spec = make_spec(kind, hidden=hidden, signal_len=dataset.traj.shape[1])
    model = build_model(spec, CounterRng(stream_seed(seed, 0)))
    adam = AdamState.for_params(model.params)
    curve: list[tuple[float, float]] = []

    n_train = dataset.n_train
    for epoch in range(epochs):
        order = np.array(CounterRng(stream_seed(seed, 1 + epoch)).shuffle_indices(n_train))
        batch_losses = []
        for lo in range(0, n_train, batch_size):
            idx = order[lo:lo + batch_size]
            loss, grads = gradients(model, feats[idx], targets[idx], loss_cfg)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {lo // batch_size}")
            adam_step(adam, model.params, grads)
            batch_losses.append(loss)
        test_loss = (evaluate_loss(model, feats[te], targets[te], loss_cfg)
                     if dataset.n_test else float("nan"))
        curve.append((float(np.mean(batch_losses)), test_loss))
        if log is not None:
            log(epoch, curve[-1])
    return TrainResult(model=model, adam=adam, norm=norm, loss_cfg=loss_cfg,
                       curve=curve, seed=seed, epochs=epochs, batch_size=batch_size)


def full_grid(choices=(32, 64, 128), layers: int = 5) -> list[tuple[int, ...]]:
    """All layer-size combinations (3^5 = 243 for the defaults)."""
    grids: list[tuple[int, ...]] = [()]
    for _ in range(layers):
        grids = [g + (c,) for g in grids for c in choices]
    return grids


def grid_search(dataset: Dataset, kind: str = "mlp", epochs: int = 200,
                seed: int = 0, candidates: list[tuple[int, ...]] | None = None,
                batch_size: int = 32, log=None) -> list[tuple[tuple[int, ...], float]]:
    """Train every candidate width tuple and rank by final test loss."""
    if candidates is None:
        candidates = full_grid()
    ranked = []
    for i, hidden in enumerate(candidates):
        result = train(kind, dataset, epochs=epochs, batch_size=batch_size,
                       seed=stream_seed(seed, 9000 + i), hidden=tuple(hidden))
        ranked.append((tuple(hidden), result.curve[-1][1]))
        if log is not None:
            log(i, hidden, ranked[-1][1])
    ranked.sort(key=lambda item: item[1])
    return ranked
