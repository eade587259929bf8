"""Minibatch training loop with per-parameter adaptive moment scaling."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from ..featurizer import FeatureVector
from ..geo import GeoPoint
from ..seeding import rng_for
from .losses import BlMode, LossWeights, batch_offsets_loss
from .net import ModelConfig, ModelParams, backward_batch, forward_batch, init_params


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss, gradient, or parameter appears."""


@dataclass(frozen=True)
class TrainingExample:
    """One attributed booking, already featurized."""

    features: FeatureVector
    center: GeoPoint
    label: GeoPoint

    def __post_init__(self) -> None:
        if not (-90.0 <= self.label.lat <= 90.0 and -180.0 <= self.label.lng <= 180.0):
            raise ValueError(f"label out of range: {self.label}")


@dataclass
class EncodedDataset:
    """Column-stacked training examples."""

    cat: np.ndarray  # (N, n_categorical) int64
    cont: np.ndarray  # (N, n_continuous) float64
    centers: np.ndarray  # (N, 2) lat/lng
    labels: np.ndarray  # (N, 2) lat/lng

    @classmethod
    def from_examples(cls, examples: Sequence[TrainingExample]) -> "EncodedDataset":
        if not examples:
            raise ValueError("dataset is empty")
        return cls(
            cat=np.stack([e.features.categorical for e in examples]),
            cont=np.stack([e.features.continuous for e in examples]),
            centers=np.array([[e.center.lat, e.center.lng] for e in examples]),
            labels=np.array([[e.label.lat, e.label.lng] for e in examples]),
        )

    def __len__(self) -> int:
        return self.cat.shape[0]


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    ``dropout_rate`` is the training-time rate for the internal dropout
    layer; scoring-time masks are the policy module's concern and may use a
    different rate.
    """

    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 30
    optimizer: str = "adam"
    dropout_rate: float = 0.95
    seed: int = 0
    bl_loss_mode: BlMode = "hinge"
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer: {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["loss_weights"] = self.loss_weights.to_json_dict()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["loss_weights"] = LossWeights.from_json_dict(d["loss_weights"])
        return cls(**d)


class Adam:
    """Standard first/second-moment optimizer (b1=0.9, b2=0.999, eps=1e-8)."""

    def __init__(self, param_shapes: dict[str, tuple], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros(s) for k, s in param_shapes.items()}
        self.v = {k: np.zeros(s) for k, s in param_shapes.items()}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name in params.param_names():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params.arrays[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        params.invalidate_version()


@dataclass
class TrainResult:
    params: ModelParams
    loss_curve: list[float]  # per-epoch mean training loss


def compute_mean_loss(
    params: ModelParams, dataset: EncodedDataset, config: TrainConfig
) -> float:
    """Deterministic (mask-free) mean loss over a dataset."""
    out, _ = forward_batch(params, dataset.cat, dataset.cont)
    loss, _ = batch_offsets_loss(
        out, dataset.centers, dataset.labels, weights=config.loss_weights, mode=config.bl_loss_mode
    )
    return loss


def train(
    config: TrainConfig,
    dataset: EncodedDataset,
    model_config: ModelConfig,
    initial: ModelParams | None = None,
) -> TrainResult:
    """Train from scratch (or from ``initial``) and return the loss curve.

    Fully deterministic for a given seed: initialization, epoch shuffles and
    per-example dropout masks all derive from it.
    """
    n = len(dataset)
    params = initial.copy() if initial is not None else init_params(model_config, config.seed)
    shuffle_rng = rng_for("train-shuffle", config.seed)
    mask_rng = rng_for("train-dropout", config.seed)
    optimizer = Adam({k: a.shape for k, a in params.arrays.items()})
    loss_curve: list[float] = []
    h = model_config.hidden_width

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            masks = None
            if config.dropout_rate > 0.0:
                masks = mask_rng.random((idx.size, h)) >= config.dropout_rate
            out, cache = forward_batch(
                params,
                dataset.cat[idx],
                dataset.cont[idx],
                masks=masks,
                dropout_rate=config.dropout_rate if masks is not None else 0.0,
                want_cache=True,
            )
            loss, dloss = batch_offsets_loss(
                out,
                dataset.centers[idx],
                dataset.labels[idx],
                weights=config.loss_weights,
                mode=config.bl_loss_mode,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch start {start}")
            grads = backward_batch(params, cache, dloss)
            for name, g in grads.items():
                if not np.isfinite(g).all():
                    raise TrainingDiverged(
                        f"non-finite gradient in {name!r} at epoch {epoch}, batch start {start}"
                    )
            optimizer.step(params, grads, config.learning_rate)
            if not params.all_finite():
                raise TrainingDiverged(f"non-finite parameter after step at epoch {epoch}")
            epoch_loss += loss * idx.size
        loss_curve.append(epoch_loss / n)
    return TrainResult(params=params, loss_curve=loss_curve)
