"""Checkpoint files: one JSON document bundling params, vocab, and stats.

Arrays are stored as base64 little-endian float64 bytes, so a save/load
round trip is bit-exact.  A SHA-256 over the payload detects truncation or
edits; a format version field guards against incompatible readers.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..featurizer import FeatureStats, Vocabulary
from .net import ModelConfig, ModelParams
from .training import TrainConfig

FORMAT_NAME = "locbounds.checkpoint"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Base class for checkpoint load failures."""


class CorruptCheckpointError(CheckpointError):
    """The file is unreadable, truncated, or fails its checksum."""


class CheckpointVersionError(CheckpointError):
    """The file has an incompatible format version or vocabulary."""


@dataclass
class CheckpointBundle:
    """Everything needed to score requests with a trained model."""

    params: ModelParams
    vocab: Vocabulary
    stats: FeatureStats
    train_config: TrainConfig


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    a = np.frombuffer(raw, dtype="<f8").copy()
    expected = int(np.prod(d["shape"])) if d["shape"] else 1
    if a.size != expected:
        raise CorruptCheckpointError(
            f"array payload has {a.size} values, expected {expected}"
        )
    return a.reshape(d["shape"])


def _payload_digest(doc: dict) -> str:
    payload = {k: v for k, v in doc.items() if k != "payload_sha256"}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    vocab: Vocabulary,
    stats: FeatureStats,
    train_config: TrainConfig,
) -> None:
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "model_version": params.version(),
        "model_config": params.config.to_json_dict(),
        "train_config": train_config.to_json_dict(),
        "vocab": vocab.to_json_dict(),
        "vocab_fingerprint": vocab.fingerprint(),
        "stats": stats.to_json_dict(),
        "arrays": {name: _encode_array(params.arrays[name]) for name in params.param_names()},
    }
    doc["payload_sha256"] = _payload_digest(doc)
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path, expected_vocab: Vocabulary | None = None) -> CheckpointBundle:
    """Load a checkpoint, verifying integrity and compatibility.

    ``expected_vocab`` asserts the checkpoint was built against a specific
    vocabulary (useful when a caller already holds encoded data).
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpointError(f"unparseable checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptCheckpointError(f"{path} is not a model checkpoint")
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {doc.get('format_version')} is not supported"
        )
    if doc.get("payload_sha256") != _payload_digest(doc):
        raise CorruptCheckpointError(f"checksum mismatch in {path}")
    if expected_vocab is not None and expected_vocab.fingerprint() != doc["vocab_fingerprint"]:
        raise CheckpointVersionError(
            "checkpoint was built against a different vocabulary"
        )
    config = ModelConfig.from_json_dict(doc["model_config"])
    arrays = {name: _decode_array(spec) for name, spec in doc["arrays"].items()}
    params = ModelParams(config=config, arrays=arrays)
    if params.version() != doc["model_version"]:
        raise CorruptCheckpointError(f"parameter content hash mismatch in {path}")
    return CheckpointBundle(
        params=params,
        vocab=Vocabulary.from_json_dict(doc["vocab"]),
        stats=FeatureStats.from_json_dict(doc["stats"]),
        train_config=TrainConfig.from_json_dict(doc["train_config"]),
    )
