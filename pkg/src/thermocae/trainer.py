"""Adam training loop for the autoencoder on the 1 - MS-SSIM objective.

One logical thread owns the parameters and optimizer state. Shuffling,
initialization, and updates are all seeded, so a full run is
bit-reproducible; validation never mutates parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .model import Cae, save_checkpoint
from .msssim import SsimParams, msssim_loss
from .rng import Rng, mix
from .tensor import Graph, Tensor


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 100
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle_seed: int = 0x5EED

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("learning rate and epsilon must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float


class Adam:
    """Standard Adam with bias correction, updating parameters in place."""

    def __init__(self, params: list[Tensor], config: TrainConfig):
        self.params = params
        self.lr = config.learning_rate
        self.b1 = config.adam_beta1
        self.b2 = config.adam_beta2
        self.eps = config.adam_eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * (g * g)
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _batches(n: int, batch_size: int) -> list[tuple[int, int]]:
    return [(i, min(i + batch_size, n)) for i in range(0, n, batch_size)]


def validate(
    cae: Cae,
    images: np.ndarray,
    config: TrainConfig,
    ssim_params: SsimParams = SsimParams(),
) -> float:
    """Mean 1 - MS-SSIM over a validation set; no parameter mutation."""
    if len(images) == 0:
        raise ValueError("validation set is empty")
    total = 0.0
    for lo, hi in _batches(len(images), config.batch_size):
        x = Tensor(images[lo:hi, None, :, :])
        loss = msssim_loss(x, cae(x), ssim_params)
        total += loss.item() * (hi - lo)
    return total / len(images)


def train(
    cae: Cae,
    dataset,
    config: TrainConfig,
    out_dir: Optional[Path] = None,
    progress: Optional[Callable[[EpochStats], None]] = None,
) -> list[EpochStats]:
    """Train on dataset.train, validating on dataset.val after each epoch.

    The train split is reshuffled per epoch from the seeded stream; the
    final partial batch is trained on. A non-finite loss aborts with the
    offending batch named. With out_dir set, writes checkpoint.cae and
    loss.csv (columns: epoch,train_loss,val_loss,seconds).
    """
    train_images = np.asarray(dataset.train, dtype=np.float64)
    val_images = np.asarray(dataset.val, dtype=np.float64)
    if len(train_images) == 0 or len(val_images) == 0:
        raise ValueError("training requires non-empty train and validation splits")

    ssim_params = SsimParams()
    adam = Adam(cae.parameters(), config)
    stats: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = Rng(mix(config.shuffle_seed, epoch)).permutation(len(train_images))
        epoch_total = 0.0
        for b, (lo, hi) in enumerate(_batches(len(train_images), config.batch_size)):
            idx = order[lo:hi]
            x = Tensor(train_images[idx][:, None, :, :])
            with Graph() as graph:
                loss = msssim_loss(x, cae(x), ssim_params)
            value = loss.item()
            if not np.isfinite(value):
                raise RuntimeError(
                    f"non-finite loss {value} at epoch {epoch}, batch {b}; aborting"
                )
            graph.backward(loss)
            adam.step()
            epoch_total += value * (hi - lo)
        train_loss = epoch_total / len(train_images)
        val_loss = validate(cae, val_images, config, ssim_params)
        entry = EpochStats(epoch, train_loss, val_loss, time.perf_counter() - t0)
        stats.append(entry)
        if progress is not None:
            progress(entry)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(cae, out_dir / "checkpoint.cae")
        write_loss_csv(out_dir / "loss.csv", stats)
    return stats


def write_loss_csv(path, stats: list[EpochStats]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,train_loss,val_loss,seconds\n")
        for s in stats:
            f.write(f"{s.epoch},{s.train_loss:.9f},{s.val_loss:.9f},{s.seconds:.3f}\n")
