"""The two controller network architectures.

MlpModel: fully connected rectifier network, affine output layer (steering
and braking torques are signed, so the output cannot be rectified).

CnnModel: the X and Y trajectory channels pass through their own stacks of
three (conv kernel 3, average-pool 2, rectifier) blocks - pooling before
activation, i.e. h = relu(pool(conv(x))) - the two 37-value outputs are
concatenated after the raw state features and fed to the same MLP head.

Forward passes are pure functions of (weights, input) and safe to call
concurrently; training uses forward_trace/backward which keep activations
in an explicit cache instead of on the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import CounterRng
from .layers import (
    avgpool2_backward,
    avgpool2_forward,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    relu,
    relu_grad,
    xavier_init,
)

DEFAULT_HIDDEN = (32, 32, 128, 32, 128)
N_CONTROLS = 5


@dataclass
class MlpSpec:
    input_dim: int = 613
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    output_dim: int = N_CONTROLS

    def to_dict(self) -> dict:
        return {"kind": "mlp", "input_dim": self.input_dim,
                "hidden": list(self.hidden), "output_dim": self.output_dim}


@dataclass
class CnnSpec:
    state_dim: int = 11
    signal_len: int = 301
    conv_maps: tuple[int, ...] = (4, 4, 1)
    kernel: int = 3
    pool: int = 2
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    output_dim: int = N_CONTROLS

    def feature_len(self) -> int:
        """Signal length after the conv/pool stack (floor halving per layer)."""
        n = self.signal_len
        for _ in self.conv_maps:
            n //= self.pool
        return n * self.conv_maps[-1]

    def head_input_dim(self) -> int:
        return self.state_dim + 2 * self.feature_len()

    def to_dict(self) -> dict:
        return {"kind": "cnn", "state_dim": self.state_dim,
                "signal_len": self.signal_len, "conv_maps": list(self.conv_maps),
                "kernel": self.kernel, "pool": self.pool,
                "hidden": list(self.hidden), "output_dim": self.output_dim}


def spec_from_dict(d: dict) -> "MlpSpec | CnnSpec":
    d = dict(d)
    kind = d.pop("kind")
    if kind == "mlp":
        return MlpSpec(input_dim=d["input_dim"], hidden=tuple(d["hidden"]),
                       output_dim=d["output_dim"])
    if kind == "cnn":
        return CnnSpec(state_dim=d["state_dim"], signal_len=d["signal_len"],
                       conv_maps=tuple(d["conv_maps"]), kernel=d["kernel"],
                       pool=d["pool"], hidden=tuple(d["hidden"]),
                       output_dim=d["output_dim"])
    raise ValueError(f"unknown model kind {kind!r}")


def _init_dense_stack(dims: list[int], rng: CounterRng, prefix: str) -> dict:
    params = {}
    for i in range(len(dims) - 1):
        params[f"{prefix}dense{i}.w"] = xavier_init(dims[i], dims[i + 1], rng)
        params[f"{prefix}dense{i}.b"] = np.zeros(dims[i + 1])
    return params


def _dense_stack_forward(params, prefix, n_layers, x, trace=False):
    cache = []
    for i in range(n_layers):
        pre = dense_forward(x, params[f"{prefix}dense{i}.w"], params[f"{prefix}dense{i}.b"])
        if trace:
            cache.append((x, pre))
        x = relu(pre) if i < n_layers - 1 else pre
    return (x, cache) if trace else x


def _dense_stack_backward(params, prefix, cache, dout, grads):
    for i in reversed(range(len(cache))):
        x, pre = cache[i]
        if i < len(cache) - 1:
            dout = relu_grad(pre, dout)
        dout, dw, db = dense_backward(x, params[f"{prefix}dense{i}.w"], dout)
        grads[f"{prefix}dense{i}.w"] = dw
        grads[f"{prefix}dense{i}.b"] = db
    return dout


class MlpModel:
    kind = "mlp"

    def __init__(self, spec: MlpSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.params = params
        self._n_layers = len(spec.hidden) + 1

    @classmethod
    def initialize(cls, spec: MlpSpec, rng: CounterRng) -> "MlpModel":
        dims = [spec.input_dim, *spec.hidden, spec.output_dim]
        return cls(spec, _init_dense_stack(dims, rng, ""))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return _dense_stack_forward(self.params, "", self._n_layers, x)

    def forward_trace(self, x: np.ndarray):
        return _dense_stack_forward(self.params, "", self._n_layers, x, trace=True)

    def backward(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        _dense_stack_backward(self.params, "", cache, dout, grads)
        return grads


def _channel_layers(spec: CnnSpec, prefix: str):
    in_maps = 1
    layers = []
    for i, out_maps in enumerate(spec.conv_maps):
        layers.append((f"{prefix}{i}", in_maps, out_maps))
        in_maps = out_maps
    return layers


def _init_conv_stack(spec: CnnSpec, rng: CounterRng, prefix: str) -> dict:
    params = {}
    for name, in_maps, out_maps in _channel_layers(spec, prefix):
        fan_in = in_maps * spec.kernel
        fan_out = out_maps * spec.kernel
        params[f"{name}.w"] = xavier_init(fan_in, fan_out, rng,
                                          shape=(out_maps, in_maps, spec.kernel))
        params[f"{name}.b"] = np.zeros(out_maps)
    return params


def _conv_stack_forward(params, spec, prefix, signal, trace=False):
    """signal (B, L) -> flattened features (B, feature_len)."""
    x = signal[:, None, :]
    cache = []
    for name, _, _ in _channel_layers(spec, prefix):
        z = conv1d_forward(x, params[f"{name}.w"], params[f"{name}.b"])
        p = avgpool2_forward(z)
        if trace:
            cache.append((x, p))
        x = relu(p)
    out = x.reshape(x.shape[0], -1)
    return (out, cache) if trace else out


def _conv_stack_backward(params, spec, prefix, cache, dflat, grads):
    layers = _channel_layers(spec, prefix)
    last_maps = layers[-1][2]
    dx = dflat.reshape(dflat.shape[0], last_maps, -1)
    for i in reversed(range(len(layers))):
        name = layers[i][0]
        x, p = cache[i]
        dp = relu_grad(p, dx)
        dz = avgpool2_backward(dp, x.shape[2])
        dx, dw, db = conv1d_backward(x, params[f"{name}.w"], dz)
        grads[f"{name}.w"] = dw
        grads[f"{name}.b"] = db
    return dx


class CnnModel:
    kind = "cnn"

    def __init__(self, spec: CnnSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.params = params
        self._n_head = len(spec.hidden) + 1

    @classmethod
    def initialize(cls, spec: CnnSpec, rng: CounterRng) -> "CnnModel":
        # Draw order (part of seed reproducibility): X stack, Y stack, head.
        params = _init_conv_stack(spec, rng, "conv_x")
        params.update(_init_conv_stack(spec, rng, "conv_y"))
        dims = [spec.head_input_dim(), *spec.hidden, spec.output_dim]
        params.update(_init_dense_stack(dims, rng, "head."))
        return cls(spec, params)

    def _split(self, features: np.ndarray):
        ns, sl = self.spec.state_dim, self.spec.signal_len
        return (features[:, :ns], features[:, ns:ns + sl],
                features[:, ns + sl:ns + 2 * sl])

    def channel_forward(self, signal: np.ndarray, channel: str = "x") -> np.ndarray:
        """Conv/pool/relu stack of one trajectory channel: (B, L) -> (B, F)."""
        return _conv_stack_forward(self.params, self.spec, f"conv_{channel}", signal)

    def forward_parts(self, state: np.ndarray, traj_x: np.ndarray,
                      traj_y: np.ndarray) -> np.ndarray:
        hx = self.channel_forward(traj_x, "x")
        hy = self.channel_forward(traj_y, "y")
        head_in = np.concatenate([state, hx, hy], axis=1)
        return _dense_stack_forward(self.params, "head.", self._n_head, head_in)

    def forward(self, features: np.ndarray) -> np.ndarray:
        return self.forward_parts(*self._split(features))

    def forward_trace(self, features: np.ndarray):
        state, tx, ty = self._split(features)
        hx, cache_x = _conv_stack_forward(self.params, self.spec, "conv_x", tx, trace=True)
        hy, cache_y = _conv_stack_forward(self.params, self.spec, "conv_y", ty, trace=True)
        head_in = np.concatenate([state, hx, hy], axis=1)
        out, cache_head = _dense_stack_forward(self.params, "head.", self._n_head,
                                               head_in, trace=True)
        return out, (cache_x, cache_y, cache_head, hx.shape[1])

    def backward(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        cache_x, cache_y, cache_head, flen = cache
        grads: dict[str, np.ndarray] = {}
        dhead_in = _dense_stack_backward(self.params, "head.", cache_head, dout, grads)
        ns = self.spec.state_dim
        _conv_stack_backward(self.params, self.spec, "conv_x", cache_x,
                             dhead_in[:, ns:ns + flen], grads)
        _conv_stack_backward(self.params, self.spec, "conv_y", cache_y,
                             dhead_in[:, ns + flen:], grads)
        return grads


def build_model(spec: "MlpSpec | CnnSpec", rng: CounterRng):
    if isinstance(spec, MlpSpec):
        return MlpModel.initialize(spec, rng)
    return CnnModel.initialize(spec, rng)


def weight_sq_sum(model) -> float:
    """Sum of squares over weight matrices/kernels (biases excluded)."""
    return float(sum(np.sum(v * v) for k, v in model.params.items()
                     if k.endswith(".w")))
