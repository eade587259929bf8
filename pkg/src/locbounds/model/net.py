"""Embedding + two-hidden-layer network predicting box extents.

Architecture: per-feature embedding tables feed, together with the continuous
block, a dense layer (-> hidden), an inverted-dropout layer, a second dense
layer (-> hidden), and a linear output of 4 extent offsets.  A softplus map
keeps offsets nonnegative; it can be disabled to study the invalid-bounds
loss on raw outputs.

Forward and backward are plain numpy; gradients are exact and are checked
against central finite differences in the test suite.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..featurizer import FeatureVector
from ..geo import ExtentOffsets
from ..seeding import rng_for


def embedding_dim(cardinality: int) -> int:
    """Embedding width heuristic: min(16, ceil(1.6 * cardinality**0.25))."""
    return min(16, math.ceil(1.6 * cardinality**0.25))


@dataclass(frozen=True)
class ModelConfig:
    """Shapes of the estimator: feature vocab sizes and layer widths."""

    feature_names: tuple[str, ...]
    vocab_sizes: dict[str, int]
    n_continuous: int = 9
    hidden_width: int = 256
    nonneg_output: bool = True

    def __post_init__(self) -> None:
        missing = [f for f in self.feature_names if f not in self.vocab_sizes]
        if missing:
            raise ValueError(f"vocab sizes missing for features: {missing}")

    @property
    def input_dim(self) -> int:
        return sum(embedding_dim(self.vocab_sizes[f]) for f in self.feature_names) + self.n_continuous

    def to_json_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "vocab_sizes": dict(self.vocab_sizes),
            "n_continuous": self.n_continuous,
            "hidden_width": self.hidden_width,
            "nonneg_output": self.nonneg_output,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            feature_names=tuple(d["feature_names"]),
            vocab_sizes={k: int(v) for k, v in d["vocab_sizes"].items()},
            n_continuous=int(d["n_continuous"]),
            hidden_width=int(d["hidden_width"]),
            nonneg_output=bool(d["nonneg_output"]),
        )


N_OUTPUTS = 4  # sw_lat, ne_lat, sw_lng, ne_lng extents


@dataclass
class ModelParams:
    """All trainable arrays plus a content-hash version string.

    The version changes whenever parameter values change and is the key that
    makes scoring-time dropout masks deterministic per model.  Training code
    must call :meth:`invalidate_version` after mutating arrays.
    """

    config: ModelConfig
    arrays: dict[str, np.ndarray]
    _version: str | None = field(default=None, repr=False)

    def param_names(self) -> list[str]:
        return sorted(self.arrays)

    @property
    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def embedding(self, feature: str) -> np.ndarray:
        return self.arrays[f"emb:{feature}"]

    def invalidate_version(self) -> None:
        self._version = None

    def version(self) -> str:
        """SHA-256 over the config and every parameter array, cached."""
        if self._version is None:
            h = hashlib.sha256()
            h.update(json.dumps(self.config.to_json_dict(), sort_keys=True).encode())
            for name in self.param_names():
                h.update(name.encode())
                h.update(self.arrays[name].astype("<f8").tobytes())
            self._version = h.hexdigest()
        return self._version

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays.values())


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """He-initialized dense layers, small random embeddings, zero biases."""
    rng = rng_for("model-init", seed)
    h = config.hidden_width
    d = config.input_dim
    arrays: dict[str, np.ndarray] = {}
    for f in config.feature_names:
        card = config.vocab_sizes[f]
        arrays[f"emb:{f}"] = rng.normal(0.0, 0.1, size=(card, embedding_dim(card)))
    arrays["w1"] = rng.normal(0.0, math.sqrt(2.0 / d), size=(d, h))
    arrays["b1"] = np.zeros(h)
    arrays["w2"] = rng.normal(0.0, math.sqrt(2.0 / h), size=(h, h))
    arrays["b2"] = np.zeros(h)
    arrays["w3"] = rng.normal(0.0, math.sqrt(1.0 / h), size=(h, N_OUTPUTS))
    arrays["b3"] = np.zeros(N_OUTPUTS)
    return ModelParams(config=config, arrays=arrays)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ForwardCache:
    """Intermediate activations kept for the backward pass."""

    cat: np.ndarray
    x: np.ndarray
    z1: np.ndarray
    h1_dropped: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    z3: np.ndarray
    masks: np.ndarray | None
    keep_scale: float


def _gather_inputs(params: ModelParams, cat: np.ndarray, cont: np.ndarray) -> np.ndarray:
    cfg = params.config
    if cat.shape[1] != len(cfg.feature_names):
        raise ValueError(
            f"expected {len(cfg.feature_names)} categorical slots, got {cat.shape[1]}"
        )
    if cont.shape[1] != cfg.n_continuous:
        raise ValueError(f"expected {cfg.n_continuous} continuous slots, got {cont.shape[1]}")
    pieces = []
    for k, f in enumerate(cfg.feature_names):
        table = params.embedding(f)
        idx = cat[:, k]
        if idx.max(initial=0) >= table.shape[0] or idx.min(initial=0) < 0:
            raise ValueError(f"categorical index out of range for feature {f!r}")
        pieces.append(table[idx])
    pieces.append(cont)
    return np.concatenate(pieces, axis=1)


def forward_batch(
    params: ModelParams,
    cat: np.ndarray,
    cont: np.ndarray,
    masks: np.ndarray | None = None,
    dropout_rate: float = 0.0,
    want_cache: bool = False,
) -> tuple[np.ndarray, ForwardCache | None]:
    """Batched forward pass; ``masks`` are boolean keep-masks drawn at
    ``dropout_rate`` (survivors scale by 1/(1-rate)).  With no masks the pass
    is deterministic and unscaled."""
    if masks is not None and not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {dropout_rate}")
    x = _gather_inputs(params, cat, cont)
    a = params.arrays
    z1 = x @ a["w1"] + a["b1"]
    h1 = np.maximum(z1, 0.0)
    keep_scale = 1.0
    if masks is not None:
        if masks.shape != h1.shape:
            raise ValueError(f"mask shape {masks.shape} does not match hidden {h1.shape}")
        keep_scale = 1.0 / (1.0 - dropout_rate)
        h1 = h1 * masks * keep_scale
    z2 = h1 @ a["w2"] + a["b2"]
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ a["w3"] + a["b3"]
    out = softplus(z3) if params.config.nonneg_output else z3
    cache = None
    if want_cache:
        cache = ForwardCache(
            cat=cat, x=x, z1=z1, h1_dropped=h1, z2=z2, h2=h2, z3=z3,
            masks=masks, keep_scale=keep_scale,
        )
    return out, cache


def forward(
    params: ModelParams,
    fv: FeatureVector,
    dropout_mask: np.ndarray | None = None,
    dropout_rate: float = 0.0,
) -> ExtentOffsets:
    """Single-example forward pass.

    Supplying no mask gives the deterministic debugging pass; scoring for
    uncertainty always supplies masks (see the policy module).
    """
    out, _ = forward_batch(
        params,
        fv.categorical[None, :],
        fv.continuous[None, :],
        masks=None if dropout_mask is None else np.asarray(dropout_mask, dtype=bool)[None, :],
        dropout_rate=dropout_rate,
    )
    return ExtentOffsets(*(float(v) for v in out[0]))


def backward_batch(
    params: ModelParams, cache: ForwardCache, dloss_dout: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of the (already batch-averaged) loss wrt every array.

    ``dloss_dout`` must already include the 1/batch factor and loss weights.
    Embedding rows not referenced by the batch receive exactly zero gradient.
    """
    a = params.arrays
    cfg = params.config
    if cfg.nonneg_output:
        dz3 = dloss_dout * _sigmoid(cache.z3)
    else:
        dz3 = dloss_dout
    grads: dict[str, np.ndarray] = {}
    grads["w3"] = cache.h2.T @ dz3
    grads["b3"] = dz3.sum(axis=0)
    dh2 = dz3 @ a["w3"].T
    dz2 = dh2 * (cache.z2 > 0.0)
    grads["w2"] = cache.h1_dropped.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ a["w2"].T
    if cache.masks is not None:
        dh1 = dh1 * cache.masks * cache.keep_scale
    dz1 = dh1 * (cache.z1 > 0.0)
    grads["w1"] = cache.x.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    dx = dz1 @ a["w1"].T
    offset = 0
    for k, f in enumerate(cfg.feature_names):
        table = params.embedding(f)
        dim = table.shape[1]
        demb = np.zeros_like(table)
        np.add.at(demb, cache.cat[:, k], dx[:, offset : offset + dim])
        grads[f"emb:{f}"] = demb
        offset += dim
    # The continuous block is data, not parameters: its slice of dx is dropped.
    return grads
