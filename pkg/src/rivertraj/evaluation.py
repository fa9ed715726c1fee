"""Displacement metrics, per-step reports and model comparison.

Errors are measured against the positions reconstructed from the discretized
ground-truth steps, not the interpolated AIS positions (``raw_positions``
gives the latter for discretization-error analysis).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ComparisonError, ShapeError
from .geometry import reconstruct_array
from .pipeline import DiscretizationSpec, dediscretize_array


def target_positions(samples: Sequence, spec: DiscretizationSpec) -> np.ndarray:
    """``(B, m, 2)`` positions dead-reckoned from the discretized n+m ground-truth steps."""
    labels = np.stack([s.labels for s in samples])
    steps = dediscretize_array(labels, spec)
    seed_pos = np.stack([s.seed_pos for s in samples])
    seed_cog = np.array([s.seed_cog for s in samples])
    n = samples[0].n
    return reconstruct_array(seed_pos, seed_cog, steps)[:, n:]


def raw_positions(samples: Sequence) -> np.ndarray:
    """``(B, m, 2)`` interpolated grid positions over the prediction window."""
    n, m = samples[0].n, samples[0].m
    return np.stack([s.positions[n + 1: n + m + 1] for s in samples])


def _distances(predictions, targets) -> np.ndarray:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 3 or p.shape[-1] != 2:
        raise ShapeError(f"prediction shape {p.shape} does not match target shape {t.shape}")
    return np.hypot(p[..., 0] - t[..., 0], p[..., 1] - t[..., 1])


def per_step_error(predictions, targets) -> np.ndarray:
    """Mean euclidean distance at each step, averaged over samples."""
    return _distances(predictions, targets).mean(axis=0)


def horizon_stats(errors) -> tuple[float, float, float]:
    """(mean, population std, median); an even count takes the mean of the central pair."""
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size == 0:
        raise ValueError("no errors")
    return float(e.mean()), float(e.std()), float(np.median(e))


def ate(predictions, targets) -> float:
    """Root mean square of the euclidean errors over all samples and steps."""
    d = _distances(predictions, targets)
    return float(np.sqrt(np.mean(d * d)))


def sample_set_id(samples: Sequence) -> str:
    h = hashlib.sha1()
    for s in samples:
        h.update(s.key.encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


@dataclass
class EvalReport:
    model_id: str
    per_step: np.ndarray
    final_minute: int
    final_stats: tuple[float, float, float]
    ate_per_horizon: np.ndarray
    sample_count: int
    test_set: str
    final_errors: np.ndarray = field(repr=False)

    def histogram(self, bin_width: float = 25.0) -> tuple[np.ndarray, np.ndarray]:
        top = max(bin_width, float(np.ceil(self.final_errors.max() / bin_width) * bin_width))
        edges = np.arange(0.0, top + bin_width, bin_width)
        counts, edges = np.histogram(self.final_errors, bins=edges)
        return counts, edges


def make_report(model_id: str, predictions, targets, test_set: str, minute: int | None = None) -> EvalReport:
    d = _distances(predictions, targets)
    m = d.shape[1]
    minute = m if minute is None else minute
    if not 1 <= minute <= m:
        raise ShapeError(f"minute {minute} outside 1..{m}")
    sq = np.cumsum(np.mean(d * d, axis=0))
    return EvalReport(
        model_id=model_id,
        per_step=d.mean(axis=0),
        final_minute=minute,
        final_stats=horizon_stats(d[:, minute - 1]),
        ate_per_horizon=np.sqrt(sq / np.arange(1, m + 1)),
        sample_count=d.shape[0],
        test_set=test_set,
        final_errors=d[:, minute - 1].copy(),
    )


@dataclass
class Comparison:
    minutes: np.ndarray
    errors: dict[str, np.ndarray]
    ranking: list[dict[str, int]]
    crossovers: dict[tuple[str, str], int | None]
    ties: dict[tuple[str, str], np.ndarray]


def compare_models(model_reports: Sequence[EvalReport], baseline_reports: Sequence[EvalReport]) -> Comparison:
    """Rank all reports per minute and find model/baseline crossovers.

    The crossover of a (model, baseline) pair is the first minute (1-based) at
    which the model's mean error exceeds the baseline's, or ``None``. Ranks
    use competition ranking, so equal errors share a rank.
    """
    reports = list(model_reports) + list(baseline_reports)
    if not reports:
        raise ComparisonError("nothing to compare")
    ids = {r.test_set for r in reports}
    lengths = {len(r.per_step) for r in reports}
    if len(ids) != 1 or len(lengths) != 1 or len({r.sample_count for r in reports}) != 1:
        raise ComparisonError("reports were computed on different test sets")
    m = lengths.pop()
    errors = {r.model_id: r.per_step for r in reports}
    ranking = []
    for k in range(m):
        vals = {name: e[k] for name, e in errors.items()}
        ranking.append({name: 1 + sum(v < vals[name] for v in vals.values()) for name in vals})
    crossovers = {}
    ties = {}
    for mr in model_reports:
        for br in baseline_reports:
            worse = np.flatnonzero(mr.per_step > br.per_step)
            crossovers[(mr.model_id, br.model_id)] = int(worse[0]) + 1 if len(worse) else None
            ties[(mr.model_id, br.model_id)] = mr.per_step == br.per_step
    return Comparison(np.arange(1, m + 1), errors, ranking, crossovers, ties)


def write_per_step_csv(path, reports: Sequence[EvalReport]) -> Path:
    path = Path(path)
    m = len(reports[0].per_step)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step_minute"] + [r.model_id for r in reports])
        for k in range(m):
            w.writerow([k + 1] + [f"{r.per_step[k]:.6f}" for r in reports])
    return path


def write_stats_csv(path, reports: Sequence[EvalReport]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["model", "minute", "mean", "std", "median", "ate", "samples"])
        for r in reports:
            mean, std, med = r.final_stats
            w.writerow(
                [
                    r.model_id,
                    r.final_minute,
                    f"{mean:.6f}",
                    f"{std:.6f}",
                    f"{med:.6f}",
                    f"{r.ate_per_horizon[r.final_minute - 1]:.6f}",
                    r.sample_count,
                ]
            )
    return path


def write_histogram_csv(path, reports: Sequence[EvalReport], bin_width: float = 25.0) -> Path:
    path = Path(path)
    top = max(float(r.final_errors.max()) for r in reports)
    edges = np.arange(0.0, np.ceil(top / bin_width) * bin_width + bin_width, bin_width)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_low", "bin_high"] + [r.model_id for r in reports])
        counts = [np.histogram(r.final_errors, bins=edges)[0] for r in reports]
        for i in range(len(edges) - 1):
            w.writerow([f"{edges[i]:g}", f"{edges[i + 1]:g}"] + [int(c[i]) for c in counts])
    return path
