"""Adam-driven training loop and the online detection entry point.

Variable-length samples are grouped into equal-length buckets; every batch
draws from a single bucket, so no padding or masking is needed and the
detector keeps its any-length-input property.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..ctsim import SaturationMask
from ..dataset import LabeledSample, normalize_values
from ..waveform import SampledWaveform
from .model import FcnModel


@dataclass(frozen=True)
class TrainConfig:
    """Optimization recipe: Adam with a halving learning-rate schedule and MSE loss."""

    epochs: int = 40
    batch_size: int = 64
    lr_initial: float = 1e-3
    lr_halving_period: int = 25
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr_initial <= 0 or self.adam_epsilon <= 0:
            raise ValueError("rates must be positive")
        if self.lr_halving_period < 1:
            raise ValueError("lr_halving_period must be >= 1")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r}")

    def lr_at_epoch(self, epoch: int) -> float:
        """Learning rate for a zero-based epoch: halved every halving period."""
        return self.lr_initial * 0.5 ** (epoch // self.lr_halving_period)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class AdamOptimizer:
    """Standard Adam with bias correction, one slot pair per parameter array."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.step = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def update(self, params: dict[str, np.ndarray],
               grads: dict[str, np.ndarray], lr: float) -> None:
        cfg = self.config
        self.step += 1
        c1 = 1.0 - cfg.adam_beta1 ** self.step
        c2 = 1.0 - cfg.adam_beta2 ** self.step
        for key, grad in grads.items():
            m = self._m.setdefault(key, np.zeros_like(grad))
            v = self._v.setdefault(key, np.zeros_like(grad))
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * grad
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * grad * grad
            params[key] -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_epsilon)


def _buckets(samples: list[LabeledSample]) -> dict[int, list[int]]:
    by_length: dict[int, list[int]] = defaultdict(list)
    for i, sample in enumerate(samples):
        by_length[len(sample)].append(i)
    return dict(sorted(by_length.items()))


def train(model: FcnModel, samples: list[LabeledSample], config: TrainConfig,
          ) -> tuple[FcnModel, list[float]]:
    """Train in place; returns the model and the per-epoch mean training loss."""
    if not samples:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    optimizer = AdamOptimizer(config)
    params = {}
    for name, layer in model.layers.items():
        params[f"{name}.w"] = layer.weights
        params[f"{name}.b"] = layer.bias

    buckets = _buckets(samples)
    history: list[float] = []
    for epoch in range(config.epochs):
        lr = config.lr_at_epoch(epoch)
        batches: list[list[int]] = []
        for indices in buckets.values():
            order = rng.permutation(len(indices))
            for start in range(0, len(indices), config.batch_size):
                batches.append([indices[j] for j in order[start:start + config.batch_size]])
        rng.shuffle(batches)

        total_loss = 0.0
        total_points = 0
        for b, batch in enumerate(batches):
            x = np.stack([samples[i].input for i in batch])
            t = np.stack([samples[i].target for i in batch])
            loss, grads, _ = model.loss_and_gradients(x, t)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, b)
            flat = {}
            for name, (gw, gb) in grads.items():
                flat[f"{name}.w"] = gw
                flat[f"{name}.b"] = gb
            optimizer.update(params, flat, lr)
            total_loss += loss * x.size
            total_points += x.size
        history.append(total_loss / total_points)

    model.training_manifest = {
        "epochs": config.epochs, "batch_size": config.batch_size,
        "lr_initial": config.lr_initial, "lr_halving_period": config.lr_halving_period,
        "seed": config.seed, "n_samples": len(samples),
        "final_loss": history[-1],
    }
    return model, history


def detect(model: FcnModel, secondary: SampledWaveform, threshold: float = 0.5,
           ) -> tuple[SaturationMask, np.ndarray]:
    """Normalize a record, run the detector, and threshold the probabilities."""
    probs = model.forward(normalize_values(secondary.values))
    return SaturationMask(probs >= threshold), probs


def pointwise_f1(model: FcnModel, samples: list[LabeledSample],
                 threshold: float = 0.5) -> float:
    """Pointwise F1 of thresholded predictions over a sample set."""
    tp = fp = fn = 0
    for sample in samples:
        pred = model.forward(sample.input) >= threshold
        truth = sample.target >= 0.5
        tp += int(np.sum(pred & truth))
        fp += int(np.sum(pred & ~truth))
        fn += int(np.sum(~pred & truth))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)
