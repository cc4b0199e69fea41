"""Model checkpoints: versioned JSON with hex-encoded float64 arrays.

Weight bytes are stored as little-endian IEEE-754 hex strings, so a
save -> load -> save round trip is byte-identical and reloaded models
reproduce outputs to the last bit. The document carries its own SHA-256
(over the canonical payload without the integrity field), which the
verifier subcommand re-checks.
"""

from __future__ import annotations

import json

import numpy as np

from ..fileio import atomic_write_text, sha256_hex
from .loss import LossConfig
from .models import build_model, spec_from_dict
from .optim import AdamState
from .training import Normalization, OUTPUT_SCALE, TrainResult

FORMAT = "drivelab-checkpoint-v1"


class CheckpointError(ValueError):
    pass


def _encode(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": arr.astype("<f8").tobytes().hex()}


def _decode(obj: dict) -> np.ndarray:
    arr = np.frombuffer(bytes.fromhex(obj["data"]), dtype="<f8").astype(float)
    return arr.reshape(obj["shape"])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def payload_hash(doc: dict) -> str:
    payload = {k: v for k, v in doc.items() if k != "integrity"}
    return sha256_hex(canonical_json(payload).encode("ascii"))


def checkpoint_from_result(result: TrainResult, metadata: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "architecture": result.model.spec.to_dict(),
        "normalization": result.norm.to_dict(),
        "output_scale": OUTPUT_SCALE.tolist(),
        "loss": result.loss_cfg.to_dict(),
        "weights": {k: _encode(v) for k, v in result.model.params.items()},
        "optimizer": {
            "alpha": result.adam.alpha, "beta1": result.adam.beta1,
            "beta2": result.adam.beta2, "eps": result.adam.eps,
            "step": result.adam.step,
            "m": {k: _encode(v) for k, v in result.adam.m.items()},
            "v": {k: _encode(v) for k, v in result.adam.v.items()},
        },
        "metadata": {
            "seed": result.seed, "epochs": result.epochs,
            "batch_size": result.batch_size, **(metadata or {}),
        },
    }
    doc["integrity"] = {"sha256": payload_hash(doc)}
    return doc


def save_checkpoint(doc: dict, path: str) -> str:
    atomic_write_text(path, canonical_json(doc))
    return doc["integrity"]["sha256"]


def load_checkpoint(path: str) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format')!r}")
    if doc["integrity"]["sha256"] != payload_hash(doc):
        raise CheckpointError("checkpoint integrity hash mismatch")
    return doc


def restore(doc: dict) -> TrainResult:
    """Rebuild the model (and optimizer state) from a checkpoint document."""
    spec = spec_from_dict(doc["architecture"])
    params = {k: _decode(v) for k, v in doc["weights"].items()}
    model_cls = build_model(spec, _ZeroRng()).__class__
    model = model_cls(spec, params)
    opt = doc["optimizer"]
    adam = AdamState(alpha=opt["alpha"], beta1=opt["beta1"], beta2=opt["beta2"],
                     eps=opt["eps"], step=opt["step"],
                     m={k: _decode(v) for k, v in opt["m"].items()},
                     v={k: _decode(v) for k, v in opt["v"].items()})
    meta = doc["metadata"]
    return TrainResult(
        model=model, adam=adam,
        norm=Normalization.from_dict(doc["normalization"]),
        loss_cfg=LossConfig(**doc["loss"]),
        seed=meta.get("seed", 0), epochs=meta.get("epochs", 0),
        batch_size=meta.get("batch_size", 32),
    )


class _ZeroRng:
    """Placeholder RNG for shape-only model construction."""

    def uniform(self, low, high):
        return 0.0
