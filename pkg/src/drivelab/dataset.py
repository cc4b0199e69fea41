"""Rollout dataset generation and the VDL1 container format.

Each instance is (initial state, constant control, 3 s trajectory sampled
at 10 ms = 301 points). Controls come from a fair coin between an
acceleration pattern (equal front torques in [0, 750] N m, rear zero) and a
deceleration pattern (all four torques equal in [-1250, 0] N m); steering
is uniform in [-0.5, 0.5] rad in both branches. Initial speed vx is uniform
in [5, 40] m/s, vy uniform in [max(-1, -vx/3), min(1, vx/3)], wheel speeds
are set for exactly zero slip, and every other state starts at zero.

Instance i draws from counter stream i (see rng module); rollouts whose
speed falls below the validity guard or that go non-finite are rejected and
the next stream is used instead, so the dataset is the first n accepted
streams in index order. Streams are processed in fixed chunks of
CHUNK_STREAMS; the chunk size is part of the reproducibility contract
(identical output bytes for any worker count).

File format "VDL1" (all integers and floats little-endian):

    magic    4 bytes  b"VDL1"
    version  u32      1
    n        u64      total instances
    n_train  u64      training split size (instances [0, n_train))
    n_test   u64      n - n_train
    seed     u64      master seed
    sim_dt   f64      integrator step [s]
    sample   f64      trajectory sampling period [s]
    horizon  f64      rollout duration [s]
    phash    32 bytes SHA-256 of the vehicle parameter set
    records  n * 621 f64: state (14), control (5), X (301), Y (301)
    footer   32 bytes SHA-256 of everything before it
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    CONTROL_DIM,
    STATE_DIM,
    STATE_FIELDS,
    ControlInput,
    VehicleState,
    rollout_batch,
    zero_slip_wheel_speeds,
)
from .fileio import atomic_write_bytes
from .params import VehicleParams, params_hash
from .rng import CounterRng, instance_rng

MAGIC = b"VDL1"
VERSION = 1
HORIZON = 3.0
SIM_DT = 1e-3
SAMPLE_DT = 1e-2
N_TRAJ = 301
CHUNK_STREAMS = 512

# Reference corpus size and split used to derive default splits.
DEFAULT_TOTAL = 43241
DEFAULT_TRAIN = 28539

_HEADER = struct.Struct("<4sIQQQQddd32s")
_RECORD_LEN = STATE_DIM + CONTROL_DIM + 2 * N_TRAJ


class DatasetError(ValueError):
    """Raised for corrupt or incompatible dataset files."""


def default_train_count(n: int) -> int:
    return round(n * DEFAULT_TRAIN / DEFAULT_TOTAL)


def sample_control(rng: CounterRng) -> ControlInput:
    """Random constant control (acceleration or deceleration pattern)."""
    if rng.coin():
        torque = rng.uniform(0.0, 750.0)
        delta = rng.uniform(-0.5, 0.5)
        return ControlInput(torques=(torque, torque, 0.0, 0.0), delta=delta)
    torque = rng.uniform(-1250.0, 0.0)
    delta = rng.uniform(-0.5, 0.5)
    return ControlInput(torques=(torque, torque, torque, torque), delta=delta)


def sample_initial_state(rng: CounterRng, control: ControlInput,
                         params: VehicleParams) -> VehicleState:
    """Random initial state with zero-slip wheels; pose and rates are zero."""
    vx = rng.uniform(5.0, 40.0)
    vy = rng.uniform(max(-1.0, -vx / 3.0), min(1.0, vx / 3.0))
    omega = zero_slip_wheel_speeds(vx, vy, control.delta, params)
    return VehicleState(vx=vx, vy=vy, omega=tuple(omega.tolist()))


@dataclass
class DatasetInstance:
    xi0: VehicleState
    u: ControlInput
    trajectory: np.ndarray  # (301, 2)


@dataclass
class Dataset:
    """In-memory dataset: parallel arrays over instances."""

    states0: np.ndarray     # (n, 14)
    controls: np.ndarray    # (n, 5)
    traj: np.ndarray        # (n, 301, 2)
    split_index: int
    master_seed: int
    param_hash: bytes
    sim_dt: float = SIM_DT
    sample_dt: float = SAMPLE_DT
    horizon: float = HORIZON

    @property
    def n(self) -> int:
        return self.states0.shape[0]

    @property
    def n_train(self) -> int:
        return self.split_index

    @property
    def n_test(self) -> int:
        return self.n - self.split_index

    def instance(self, i: int) -> DatasetInstance:
        return DatasetInstance(
            xi0=VehicleState.from_array(self.states0[i]),
            u=ControlInput.from_array(self.controls[i]),
            trajectory=self.traj[i],
        )

    def subset(self, n_train: int, n_test: int) -> "Dataset":
        """Leading slice of each split; keeps provenance fields."""
        if n_train > self.n_train or n_test > self.n_test:
            raise DatasetError("subset larger than the available splits")
        idx = np.r_[0:n_train, self.split_index:self.split_index + n_test]
        return Dataset(
            states0=self.states0[idx].copy(),
            controls=self.controls[idx].copy(),
            traj=self.traj[idx].copy(),
            split_index=n_train,
            master_seed=self.master_seed,
            param_hash=self.param_hash,
            sim_dt=self.sim_dt,
            sample_dt=self.sample_dt,
            horizon=self.horizon,
        )


@dataclass
class GenerationStats:
    streams_used: int
    rejected: int


def _chunk_worker(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    master_seed, chunk_index, params = args
    base = chunk_index * CHUNK_STREAMS
    states0 = np.zeros((CHUNK_STREAMS, STATE_DIM))
    controls = np.zeros((CHUNK_STREAMS, CONTROL_DIM))
    for j in range(CHUNK_STREAMS):
        rng = instance_rng(master_seed, base + j)
        control = sample_control(rng)
        state = sample_initial_state(rng, control, params)
        states0[j] = state.as_array()
        controls[j] = control.as_array()
    _, history, alive = rollout_batch(states0, controls, params,
                                      duration=HORIZON, dt=SIM_DT, sample_dt=SAMPLE_DT)
    return alive, states0, controls, history[:, :, 0:2]


def generate_dataset(n: int, master_seed: int, params: VehicleParams | None = None,
                     train_count: int | None = None, workers: int = 1,
                     ) -> tuple[Dataset, GenerationStats]:
    """Generate the first n accepted instances of the seed's stream sequence.

    Identical output for any worker count: streams are consumed in fixed
    chunks and chunk results are merged in index order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params or VehicleParams()
    if train_count is None:
        train_count = default_train_count(n)
    if not 0 <= train_count <= n:
        raise ValueError("train count out of range")

    pieces: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    accepted = 0
    rejected = 0
    streams_used = 0

    def consume(chunk) -> bool:
        nonlocal accepted, rejected, streams_used
        alive, states0, controls, traj = chunk
        keep = np.flatnonzero(alive)
        need = n - accepted
        if len(keep) > need:
            last = keep[need - 1] if need > 0 else -1
            rejected += int(np.sum(~alive[:last + 1]))
            streams_used += int(last + 1)
            keep = keep[:need]
        else:
            rejected += int(np.sum(~alive))
            streams_used += CHUNK_STREAMS
        if len(keep):
            pieces.append((states0[keep], controls[keep], traj[keep]))
            accepted += len(keep)
        return accepted >= n

    if workers <= 1:
        chunk_index = 0
        while accepted < n:
            if consume(_chunk_worker((master_seed, chunk_index, params))):
                break
            chunk_index += 1
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending: dict[int, object] = {}
            next_submit = 0
            next_consume = 0
            while accepted < n:
                # Upper estimate of chunks still needed (rejections included);
                # keeps tiny runs from fanning out needlessly.
                plausible = -((n - accepted) * 3 // (-2 * CHUNK_STREAMS))
                while len(pending) < min(workers + 1, max(plausible, 1)):
                    pending[next_submit] = pool.submit(
                        _chunk_worker, (master_seed, next_submit, params))
                    next_submit += 1
                done = consume(pending.pop(next_consume).result())
                next_consume += 1
                if done:
                    break

    dataset = Dataset(
        states0=np.concatenate([p[0] for p in pieces]),
        controls=np.concatenate([p[1] for p in pieces]),
        traj=np.concatenate([p[2] for p in pieces]),
        split_index=train_count,
        master_seed=master_seed,
        param_hash=params_hash(params),
    )
    return dataset, GenerationStats(streams_used=streams_used, rejected=rejected)


def dataset_to_bytes(dataset: Dataset) -> bytes:
    header = _HEADER.pack(
        MAGIC, VERSION, dataset.n, dataset.n_train, dataset.n_test,
        dataset.master_seed & (2 ** 64 - 1),
        dataset.sim_dt, dataset.sample_dt, dataset.horizon, dataset.param_hash,
    )
    records = np.concatenate(
        [dataset.states0,
         dataset.controls,
         dataset.traj[:, :, 0],
         dataset.traj[:, :, 1]], axis=1)
    assert records.shape[1] == _RECORD_LEN
    body = header + records.astype("<f8").tobytes()
    import hashlib
    return body + hashlib.sha256(body).digest()


def write_dataset(dataset: Dataset, path: str) -> str:
    """Write the VDL1 file; returns the hex integrity hash."""
    data = dataset_to_bytes(dataset)
    atomic_write_bytes(path, data)
    return data[-32:].hex()


def read_dataset(path: str) -> Dataset:
    with open(path, "rb") as fh:
        data = fh.read()
    return dataset_from_bytes(data)


def dataset_from_bytes(data: bytes) -> Dataset:
    import hashlib
    if len(data) < _HEADER.size + 32:
        raise DatasetError("file too short")
    body, footer = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != footer:
        raise DatasetError("integrity hash mismatch")
    magic, version, n, n_train, n_test, seed, sim_dt, sample_dt, horizon, phash = \
        _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise DatasetError("not a VDL1 file")
    if version != VERSION:
        raise DatasetError(f"unsupported version {version}")
    if n_train + n_test != n:
        raise DatasetError("inconsistent split counts")
    expected = _HEADER.size + n * _RECORD_LEN * 8
    if len(body) != expected:
        raise DatasetError("truncated records")
    records = np.frombuffer(body, dtype="<f8", offset=_HEADER.size)
    records = records.reshape(n, _RECORD_LEN).astype(float)
    traj = np.stack([records[:, 19:19 + N_TRAJ], records[:, 19 + N_TRAJ:]], axis=2)
    return Dataset(
        states0=records[:, 0:STATE_DIM].copy(),
        controls=records[:, STATE_DIM:STATE_DIM + CONTROL_DIM].copy(),
        traj=traj,
        split_index=int(n_train),
        master_seed=int(seed),
        param_hash=phash,
        sim_dt=sim_dt,
        sample_dt=sample_dt,
        horizon=horizon,
    )


def dataset_integrity_hash(path: str) -> str:
    """Hex footer hash of a dataset file (verifies content on read)."""
    with open(path, "rb") as fh:
        data = fh.read()
    import hashlib
    body, footer = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != footer:
        raise DatasetError("integrity hash mismatch")
    return footer.hex()


def export_csv(dataset: Dataset, path: str) -> None:
    """Mirror of the binary records for inspection."""
    cols = (["instance", "split"] + list(STATE_FIELDS)
            + ["t_fl", "t_fr", "t_rl", "t_rr", "delta"]
            + [f"x{k:03d}" for k in range(N_TRAJ)]
            + [f"y{k:03d}" for k in range(N_TRAJ)])
    lines = [",".join(cols)]
    for i in range(dataset.n):
        split = "train" if i < dataset.split_index else "test"
        values = np.concatenate([dataset.states0[i], dataset.controls[i],
                                 dataset.traj[i, :, 0], dataset.traj[i, :, 1]])
        lines.append(f"{i},{split}," + ",".join(repr(v) for v in values))
    from .fileio import atomic_write_text
    atomic_write_text(path, "\n".join(lines) + "\n")
