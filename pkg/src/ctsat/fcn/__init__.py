"""From-scratch 1-D fully convolutional saturation detector."""

from .layers import Conv1d
from .model import FcnModel, InputTooShortError, default_architecture
from .training import (
    AdamOptimizer,
    TrainConfig,
    TrainingDivergedError,
    detect,
    pointwise_f1,
    train,
)

__all__ = [
    "AdamOptimizer",
    "Conv1d",
    "FcnModel",
    "InputTooShortError",
    "TrainConfig",
    "TrainingDivergedError",
    "default_architecture",
    "detect",
    "pointwise_f1",
    "train",
]
