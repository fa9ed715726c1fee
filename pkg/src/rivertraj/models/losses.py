"""Training objectives.

All functions take raw logits; the cross entropy is computed through
``log_softmax`` for numerical stability.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def cross_entropy(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean cross entropy over all leading dimensions of ``(..., V)`` logits."""
    logp = F.log_softmax(logits, dim=-1)
    return -logp.gather(-1, target.unsqueeze(-1)).squeeze(-1).mean()


def classification_loss(distance_logits, cog_logits, target_labels) -> torch.Tensor:
    """Equal-weight sum of the distance and course-change cross entropies.

    ``target_labels`` is ``(..., 2)`` with (distance, cog) classes.
    """
    ce_cog = cross_entropy(cog_logits, target_labels[..., 1])
    ce_dist = cross_entropy(distance_logits, target_labels[..., 0])
    return 0.5 * ce_cog + 0.5 * ce_dist


def normalize_steps(steps: torch.Tensor, max_distance: float) -> torch.Tensor:
    """Map (distance, cog change) to [0, 1] x [0, 1]."""
    return torch.stack([steps[..., 0] / max_distance, (steps[..., 1] + 180.0) / 360.0], dim=-1)


def regression_loss(regressed: torch.Tensor, target_normalized: torch.Tensor) -> torch.Tensor:
    mse_cog = F.mse_loss(regressed[..., 1], target_normalized[..., 1])
    mse_dist = F.mse_loss(regressed[..., 0], target_normalized[..., 0])
    return 0.5 * mse_cog + 0.5 * mse_dist


def hybrid_loss(
    distance_logits,
    cog_logits,
    regressed,
    target_labels,
    target_normalized,
    alpha: float = 0.5,
) -> torch.Tensor:
    """``alpha * classification + (1 - alpha) * regression``.

    ``regressed`` and ``target_normalized`` are in the units of
    :func:`normalize_steps`.
    """
    cls = classification_loss(distance_logits, cog_logits, target_labels)
    reg = regression_loss(regressed, target_normalized)
    return alpha * cls + (1.0 - alpha) * reg
