"""Greedy inference and trajectory reconstruction from predicted labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..errors import ConfigError
from ..geometry import reconstruct_array
from ..pipeline import DiscretizationSpec, dediscretize_array
from .networks import Seq2Seq
from .training import to_tensors


@dataclass
class PredictionResult:
    """Greedy predictions for a batch of B samples.

    Probability arrays are ``(B, m, V)``; ``labels`` and ``steps`` are
    ``(B, m, 2)``; ``positions`` holds the m predicted positions per sample.
    """

    distance_probs: np.ndarray | None
    cog_probs: np.ndarray | None
    labels: np.ndarray
    steps: np.ndarray
    positions: np.ndarray

    def __len__(self):
        return len(self.labels)


def _check_compatible(model: Seq2Seq, spec: DiscretizationSpec):
    cfg = model.config
    if cfg.distance_vocab != spec.distance_vocab or cfg.cog_vocab != spec.cog_vocab:
        raise ConfigError(
            f"model vocab ({cfg.distance_vocab}, {cfg.cog_vocab}) does not match "
            f"discretization {spec.spec_id}"
        )


@torch.no_grad()
def predict_greedy(
    model: Seq2Seq,
    samples: Sequence,
    spec: DiscretizationSpec,
    batch_size: int = 512,
    keep_probabilities: bool = True,
) -> PredictionResult:
    """Decode m steps per sample and dead-reckon the predicted positions.

    Reconstruction starts at the sample's seed pose and runs through the n
    observed (discretized) steps before the m predicted ones.
    """
    _check_compatible(model, spec)
    cfg = model.config
    data = to_tensors(samples, cfg.n, cfg.m)
    model.eval()
    dist_p, cog_p, labels = [], [], []
    for start in range(0, len(data), batch_size):
        b = data.subset(slice(start, start + batch_size))
        out = model.greedy(b.src, b.context if cfg.context_mode == "curvature" else None)
        labels.append(out["labels"].numpy())
        if keep_probabilities:
            dist_p.append(torch.softmax(out["distance"].double(), -1).numpy())
            cog_p.append(torch.softmax(out["cog"].double(), -1).numpy())
    labels = np.concatenate(labels)
    steps = dediscretize_array(labels, spec)
    observed = dediscretize_array(np.stack([s.input_labels for s in samples]), spec)
    seed_pos = np.stack([s.seed_pos for s in samples])
    seed_cog = np.array([s.seed_cog for s in samples])
    track = reconstruct_array(seed_pos, seed_cog, np.concatenate([observed, steps], axis=1))
    return PredictionResult(
        np.concatenate(dist_p) if keep_probabilities else None,
        np.concatenate(cog_p) if keep_probabilities else None,
        labels,
        steps,
        track[:, cfg.n:],
    )
