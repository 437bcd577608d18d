"""
Toy Trainer - Adam on the synthetic quadrant dataset

One seeded generator drives initialization, epoch shuffling and
augmentation, so a seed fixes the whole run bit for bit.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from gmar.config import REFERENCE_TRAIN_RECIPE, TOY_TRAIN_PROFILE
from gmar.errors import ParameterError
from gmar.logging import get_logger
from gmar.model.vit import ModelParams, ViTConfig, bind_params, forward_batch, init_params, \
    predict_batch
from gmar.tensor import Tape
from gmar.training.optim import LR_SCHEDULES, AdamState, adam_step, clip_by_global_norm, cross_entropy, \
    scheduled_learning_rate

log = get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = REFERENCE_TRAIN_RECIPE["learning_rate"]
    beta1: float = REFERENCE_TRAIN_RECIPE["beta1"]
    beta2: float = REFERENCE_TRAIN_RECIPE["beta2"]
    epsilon: float = REFERENCE_TRAIN_RECIPE["epsilon"]
    batch_size: int = REFERENCE_TRAIN_RECIPE["batch_size"]
    epochs: int = TOY_TRAIN_PROFILE["epochs"]
    seed: int = 0
    augment: bool = True
    crop_padding: int = TOY_TRAIN_PROFILE["crop_padding"]
    warmup_steps: int = 0
    lr_schedule: str = "constant"
    grad_clip: Optional[float] = None

    def __post_init__(self):
        problems = []
        if not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0 (got {self.learning_rate})")
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                problems.append(f"{name} must lie in (0, 1) (got {getattr(self, name)})")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0 (got {self.epsilon})")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1 (got {self.batch_size})")
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1 (got {self.epochs})")
        if self.crop_padding < 0:
            problems.append(f"crop_padding must be >= 0 (got {self.crop_padding})")
        if self.warmup_steps < 0:
            problems.append(f"warmup_steps must be >= 0 (got {self.warmup_steps})")
        if self.lr_schedule not in LR_SCHEDULES:
            problems.append(f"lr_schedule must be one of {LR_SCHEDULES} (got {self.lr_schedule!r})")
        if self.grad_clip is not None and not self.grad_clip > 0:
            problems.append(f"grad_clip must be > 0 or None (got {self.grad_clip})")
        if problems:
            raise ParameterError("invalid training config: " + "; ".join(problems))

    @classmethod
    def from_profile(cls, profile: Mapping = TOY_TRAIN_PROFILE, **overrides) -> "TrainConfig":
        merged = {**profile, **overrides}
        return cls(**{k: merged[k] for k in cls.__dataclass_fields__ if k in merged})


@dataclass
class TrainingResult:
    params: ModelParams
    history: List[Dict] = field(default_factory=list)
    initial_loss: float = float("nan")

    @property
    def final_accuracy(self) -> float:
        return self.history[-1]["accuracy"] if self.history else float("nan")


def stack_dataset(dataset: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """(image, label) pairs -> pixels (B, H, W, 3), labels (B,)."""
    if len(dataset) == 0:
        raise ParameterError("dataset is empty")
    pixels = np.stack([np.asarray(getattr(img, "pixels", img), dtype=np.float64) for img, _ in dataset])
    labels = np.asarray([label for _, label in dataset], dtype=np.int64)
    return pixels, labels


def augment_batch(pixels: np.ndarray, labels: np.ndarray, rng: np.random.Generator, padding: int,
                  label_flip: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random horizontal flip, then a random crop from a zero-padded copy.

    `label_flip[k]` is the class a mirrored class-k image belongs to;
    None keeps labels as they are.
    """
    batch, height, width, _ = pixels.shape
    flips = rng.random(batch) < 0.5
    out = np.where(flips[:, None, None, None], pixels[:, :, ::-1, :], pixels)
    labels = np.asarray(labels, dtype=np.int64)
    if label_flip is not None:
        labels = np.where(flips, np.asarray(label_flip, dtype=np.int64)[labels], labels)
    if padding == 0:
        return out, labels
    padded = np.pad(out, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    offsets = rng.integers(0, 2 * padding + 1, size=(batch, 2))
    cropped = np.stack([
        padded[i, dy:dy + height, dx:dx + width] for i, (dy, dx) in enumerate(offsets)
    ])
    return cropped, labels


def accuracy(params: ModelParams, dataset: Sequence, batch_size: int = 256) -> float:
    pixels, labels = stack_dataset(dataset)
    correct = 0
    for start in range(0, len(labels), batch_size):
        predicted, _ = predict_batch(params, pixels[start:start + batch_size])
        correct += int(np.sum(predicted == labels[start:start + batch_size]))
    return correct / len(labels)


def _batch_loss_and_grads(params: ModelParams, pixels: np.ndarray,
                          labels: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    tape = Tape()
    weights = bind_params(params, tape)
    out = forward_batch(params, pixels, tape=tape, weights=weights, capture=False)
    loss = cross_entropy(out.logits, labels)
    store = tape.backward(loss)
    return loss.item(), {name: store[tensor] for name, tensor in weights.items()}


def train(vit_config: ViTConfig, train_config: TrainConfig, dataset: Sequence,
          params: Optional[ModelParams] = None,
          label_flip: Optional[Sequence[int]] = None) -> TrainingResult:
    """
    Mini-batch Adam over `train_config.epochs` epochs.

    Each step clips the batch gradient to `grad_clip` (global norm) when
    set, then steps at the scheduled learning rate.

    History rows are {epoch, loss, accuracy}: loss is the epoch's mean
    batch loss, accuracy is measured on the un-augmented dataset after
    the epoch. `initial_loss` is the first batch's loss before any update.
    `label_flip` is passed to `augment_batch` for datasets whose classes
    are not mirror-invariant.
    """
    pixels, labels = stack_dataset(dataset)
    if pixels.shape[1:] != (vit_config.image_size, vit_config.image_size, 3):
        raise ParameterError(f"dataset images {pixels.shape[1:]} do not fit image_size {vit_config.image_size}")
    if np.any(labels < 0) or np.any(labels >= vit_config.num_classes):
        raise ParameterError(f"labels outside [0, {vit_config.num_classes})")
    if label_flip is not None:
        table = np.asarray(label_flip, dtype=np.int64)
        if table.shape != (vit_config.num_classes,) or np.any(table < 0) or np.any(table >= vit_config.num_classes):
            raise ParameterError(f"label_flip must map each of {vit_config.num_classes} classes to a class")

    rng = np.random.default_rng(train_config.seed)
    params = params or init_params(vit_config, rng)
    state = AdamState.zeros_like(params.tensors)
    n = len(labels)
    batches_per_epoch = math.ceil(n / train_config.batch_size)
    total_steps = train_config.epochs * batches_per_epoch
    log.info(
        f"Training {params.num_parameters()} parameters on {n} images, "
        f"{train_config.epochs} epochs x {batches_per_epoch} batches"
    )

    history, initial_loss, step = [], None, 0
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, train_config.batch_size):
            index = order[start:start + train_config.batch_size]
            batch, batch_labels = pixels[index], labels[index]
            if train_config.augment:
                batch, batch_labels = augment_batch(batch, batch_labels, rng, train_config.crop_padding,
                                                    label_flip)
            loss, grads = _batch_loss_and_grads(params, batch, batch_labels)
            if initial_loss is None:
                initial_loss = loss
            step += 1
            if train_config.grad_clip is not None:
                grads, _ = clip_by_global_norm(grads, train_config.grad_clip)
            lr = scheduled_learning_rate(train_config.learning_rate, step, total_steps,
                                         train_config.warmup_steps, train_config.lr_schedule)
            updated, state = adam_step(params.tensors, grads, state, train_config, step, learning_rate=lr)
            params = params.replace(updated)
            losses.append(loss)

        row = {"epoch": epoch, "loss": float(np.mean(losses)), "accuracy": accuracy(params, dataset)}
        history.append(row)
        log.info(f"[EPOCH {epoch}/{train_config.epochs}] loss {row['loss']:.4f}  "
                 f"accuracy {row['accuracy']:.3f}  lr {lr:.2e}")

    return TrainingResult(params=params, history=history, initial_loss=initial_loss)
