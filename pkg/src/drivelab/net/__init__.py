"""From-scratch dense + 1-D convolutional network stack with manual
backpropagation, trained to map (state, target trajectory) to controls."""

from .layers import xavier_init
from .loss import LossConfig, control_loss
from .models import CnnModel, CnnSpec, MlpModel, MlpSpec, build_model
from .optim import AdamState, adam_step
from .training import Normalization, OUTPUT_SCALE, TrainResult, grid_search, train

__all__ = [
    "AdamState", "CnnModel", "CnnSpec", "LossConfig", "MlpModel", "MlpSpec",
    "Normalization", "OUTPUT_SCALE", "TrainResult", "adam_step", "build_model",
    "control_loss", "grid_search", "train", "xavier_init",
]
