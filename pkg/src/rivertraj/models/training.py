"""Batching, the training loop with early stopping, and checkpoints."""

from __future__ import annotations

import copy
import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..errors import ConfigError, ShapeError, TrainingError
from ..river import context_length
from .config import ModelConfig
from .losses import classification_loss, hybrid_loss, normalize_steps
from .networks import Seq2Seq, build_model

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "rivertraj-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class SampleTensors:
    """Stacked model inputs for a list of samples."""

    src: torch.Tensor  # (B, n, 2) long
    tgt: torch.Tensor  # (B, m, 2) long
    context: torch.Tensor  # (B, N+1) float
    target_steps: torch.Tensor  # (B, m, 2) float, raw continuous

    def __len__(self):
        return self.src.shape[0]

    def subset(self, idx) -> "SampleTensors":
        return SampleTensors(self.src[idx], self.tgt[idx], self.context[idx], self.target_steps[idx])


def to_tensors(samples: Sequence, n: int | None = None, m: int | None = None) -> SampleTensors:
    if not samples:
        raise ShapeError("no samples")
    n = n or samples[0].n
    m = m or samples[0].m
    if any(s.n != n or s.m != m for s in samples):
        raise ShapeError(f"samples do not all have n={n}, m={m}")
    labels = np.stack([s.labels for s in samples])
    steps = np.stack([s.steps for s in samples])
    ctx = np.stack([s.context for s in samples])
    if ctx.shape[1] != context_length(n, m):
        raise ShapeError("context window length does not match n, m")
    return SampleTensors(
        torch.as_tensor(labels[:, :n], dtype=torch.long),
        torch.as_tensor(labels[:, n:], dtype=torch.long),
        torch.as_tensor(ctx, dtype=torch.float32),
        torch.as_tensor(steps[:, n:], dtype=torch.float32),
    )


def batch_loss(model: Seq2Seq, batch: SampleTensors) -> torch.Tensor:
    cfg = model.config
    out = model(batch.src, batch.tgt, batch.context)
    if cfg.head_mode == "hybrid":
        return hybrid_loss(
            out["distance"],
            out["cog"],
            out["regression"],
            batch.tgt,
            normalize_steps(batch.target_steps, cfg.max_distance),
            cfg.alpha,
        )
    return classification_loss(out["distance"], out["cog"], batch.tgt)


@torch.no_grad()
def evaluate_loss(model: Seq2Seq, data: SampleTensors, batch_size: int = 512) -> float:
    """Teacher-forced loss in eval mode, averaged over samples."""
    was_training = model.training
    model.eval()
    total = 0.0
    for start in range(0, len(data), batch_size):
        batch = data.subset(slice(start, start + batch_size))
        total += float(batch_loss(model, batch)) * len(batch)
    model.train(was_training)
    return total / len(data)


@dataclass
class TrainResult:
    model: Seq2Seq
    curves: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    initial_val_loss: float = math.inf
    stopped_early: bool = False
    seconds: float = 0.0


def train(split, config: ModelConfig, log_every: int = 1) -> TrainResult:
    """Adam with early stopping on validation loss.

    The best-validation parameters are restored at the end. Deterministic for
    a fixed ``config.seed`` in single-threaded CPU execution.
    """
    if not split.train or not split.validation:
        raise ConfigError("training needs non-empty train and validation sets")
    train_data = to_tensors(split.train, config.n, config.m)
    val_data = to_tensors(split.validation, config.n, config.m)
    torch.manual_seed(config.seed)
    model = build_model(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    gen = torch.Generator().manual_seed(config.seed)

    result = TrainResult(model=model)
    result.initial_val_loss = evaluate_loss(model, val_data)
    best_state = copy.deepcopy(model.state_dict())
    result.best_val_loss = result.initial_val_loss
    stale = 0
    t0 = time.monotonic()
    for epoch in range(1, config.max_epochs + 1):
        model.train()
        perm = torch.randperm(len(train_data), generator=gen)
        running = 0.0
        for b, start in enumerate(range(0, len(train_data), config.batch_size)):
            batch = train_data.subset(perm[start:start + config.batch_size])
            loss = batch_loss(model, batch)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {b}",
                    {"epoch": epoch, "batch": b, "loss": loss.item(), "lr": config.learning_rate},
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            running += loss.item() * len(batch)
        train_loss = running / len(train_data)
        val_loss = evaluate_loss(model, val_data)
        result.curves.append((epoch, train_loss, val_loss))
        if epoch % log_every == 0:
            logger.info("epoch %d train %.4f val %.4f", epoch, train_loss, val_loss)
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                result.stopped_early = True
                break
        if config.max_train_seconds is not None and time.monotonic() - t0 > config.max_train_seconds:
            logger.info("time budget reached after epoch %d", epoch)
            break
    model.load_state_dict(best_state)
    model.eval()
    result.seconds = time.monotonic() - t0
    return result


def write_curves(path, curves) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in curves:
            w.writerow([epoch, f"{tr:.8f}", f"{va:.8f}"])
    return path


def save_checkpoint(path, model: Seq2Seq, spec_id: str, frame_id: str, extra: dict | None = None) -> Path:
    path = Path(path)
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": model.config.to_dict(),
            "state_dict": model.state_dict(),
            "spec_id": spec_id,
            "frame_id": frame_id,
            "extra": extra or {},
        },
        path,
    )
    return path


def load_checkpoint(path) -> tuple[Seq2Seq, dict]:
    ckpt = torch.load(path, map_location="cpu", weights_only=True)
    if ckpt.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a rivertraj checkpoint")
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {ckpt.get('version')}")
    model = build_model(ModelConfig.from_dict(ckpt["config"]))
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model, ckpt
