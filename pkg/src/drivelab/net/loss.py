"""Training loss: steering-weighted control regression with L2 penalty.

    L = gamma * L_delta + (1 - gamma) * L_T + L_reg
    L_delta = (1/0.5) * MSE(steering)
    L_T     = (1/(4*2000)) * sum_i MSE(torque_i)
    L_reg   = gamma_reg * ||weights||_2^2

gamma close to 1 prioritizes the lateral dynamics over the longitudinal
one. The scaling factors normalize steering and torque magnitudes and are
applied exactly as stated (not squared).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LossConfig:
    gamma: float = 0.99
    steering_scale: float = 1.0 / 0.5
    torque_scale: float = 1.0 / (4.0 * 2000.0)
    gamma_reg: float = 1e-5

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.gamma_reg < 0.0:
            raise ValueError("gamma_reg must be >= 0")

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "steering_scale": self.steering_scale,
                "torque_scale": self.torque_scale, "gamma_reg": self.gamma_reg}


def data_loss(pred: np.ndarray, target: np.ndarray, cfg: LossConfig) -> float:
    """gamma*L_delta + (1-gamma)*L_T for a batch (no regularization term)."""
    err = pred - target
    l_delta = cfg.steering_scale * np.mean(err[:, 4] ** 2)
    l_torque = cfg.torque_scale * np.sum(np.mean(err[:, 0:4] ** 2, axis=0))
    return float(cfg.gamma * l_delta + (1.0 - cfg.gamma) * l_torque)


def data_loss_grad(pred: np.ndarray, target: np.ndarray, cfg: LossConfig) -> np.ndarray:
    """d(data_loss)/d(pred)."""
    batch = pred.shape[0]
    err = pred - target
    dpred = np.empty_like(pred)
    dpred[:, 0:4] = (1.0 - cfg.gamma) * cfg.torque_scale * 2.0 * err[:, 0:4] / batch
    dpred[:, 4] = cfg.gamma * cfg.steering_scale * 2.0 * err[:, 4] / batch
    return dpred


def control_loss(pred: np.ndarray, target: np.ndarray, weight_sq: float,
                 cfg: LossConfig) -> float:
    """Full training loss including the L2 term for the given weight norm."""
    return data_loss(pred, target, cfg) + cfg.gamma_reg * weight_sq
