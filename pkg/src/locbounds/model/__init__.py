"""Contextual estimator: network, losses, training loop, checkpoints."""

from .checkpoint import (
    CheckpointBundle,
    CheckpointError,
    CheckpointVersionError,
    CorruptCheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from .losses import LossWeights, batch_offsets_loss, bl_loss, rbs_loss, total_loss, vb_loss
from .net import (
    ModelConfig,
    ModelParams,
    backward_batch,
    embedding_dim,
    forward,
    forward_batch,
    init_params,
    softplus,
)
from .training import (
    Adam,
    EncodedDataset,
    TrainConfig,
    TrainingDiverged,
    TrainingExample,
    TrainResult,
    compute_mean_loss,
    train,
)

__all__ = [
    "Adam",
    "CheckpointBundle",
    "CheckpointError",
    "CheckpointVersionError",
    "CorruptCheckpointError",
    "EncodedDataset",
    "LossWeights",
    "ModelConfig",
    "ModelParams",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "TrainingExample",
    "backward_batch",
    "batch_offsets_loss",
    "bl_loss",
    "compute_mean_loss",
    "embedding_dim",
    "forward",
    "forward_batch",
    "init_params",
    "load_checkpoint",
    "rbs_loss",
    "save_checkpoint",
    "softplus",
    "total_loss",
    "train",
    "vb_loss",
]
