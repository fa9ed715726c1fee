"""Average-velocity baselines that advance along the river axis.

Each baseline starts at the hectometer of the last observed position and adds
a per-minute distance d_i for each predicted minute; predicted positions are
the corresponding axis points, so lateral offsets are ignored.

* ``AVGObs``: mean observed step distance, constant.
* ``AVGData``: training-set mean distance per minute at the current hectometer.
* ``AVGDataObs``: ``AVGData`` plus the mean deviation of the observed steps
  from the table during observation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("AVGObs", "AVGData", "AVGDataObs")
MIN_ADVANCE = 0.1  # m per minute, keeps predicted hectometers strictly increasing


def _mean(values) -> float:
    # correctly rounded sum, so the result does not depend on summation order
    return math.fsum(values) / len(values)


def hm_bin(h) -> np.ndarray | int:
    """Index of the hectometer section containing ``h`` (river-km)."""
    b = np.floor(np.asarray(h, dtype=np.float64) * 10.0 + 1e-9).astype(np.int64)
    return int(b) if b.ndim == 0 else b


@dataclass
class SpeedTable:
    """Mean distance per minute (m) for each hectometer section.

    Sections without data fall back to the nearest populated section (the
    lower one on ties); ``counts`` is 0 for those.
    """

    bins: np.ndarray
    means: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.int64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self._populated = self.bins[self.counts > 0]
        self._pop_means = self.means[self.counts > 0]
        if len(self._populated) == 0:
            raise ValueError("speed table has no populated hectometer")

    def lookup_bin(self, b: int) -> float:
        pop = self._populated
        i = int(np.searchsorted(pop, b))
        if i < len(pop) and pop[i] == b:
            return float(self._pop_means[i])
        if i == 0:
            return float(self._pop_means[0])
        if i == len(pop):
            return float(self._pop_means[-1])
        lo, hi = pop[i - 1], pop[i]
        return float(self._pop_means[i - 1] if b - lo <= hi - b else self._pop_means[i])

    def __call__(self, h: float) -> float:
        return self.lookup_bin(hm_bin(h))

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["hm", "mean", "count"])
            for b, mu, c in zip(self.bins, self.means, self.counts):
                w.writerow([f"{b / 10:.1f}", repr(float(mu)), int(c)])
        return path

    @classmethod
    def read_csv(cls, path) -> "SpeedTable":
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        return cls(
            [hm_bin(float(r["hm"])) for r in rows],
            [float(r["mean"]) for r in rows],
            [int(r["count"]) for r in rows],
        )


def build_speed_table(train_samples: Sequence, hm_range: tuple[float, float] | None = None) -> SpeedTable:
    """Group-by mean of the step distances of all training samples.

    A step belongs to the hectometer section of its start position. With
    ``hm_range`` every section in the range gets an entry, empty ones filled
    from the nearest populated section.
    """
    if not train_samples:
        raise ValueError("empty training set")
    keys = []
    dists = []
    for s in train_samples:
        k = s.n + s.m
        keys.append(hm_bin(s.hms[:k]))
        dists.append(s.steps[:k, 0])
    keys = np.concatenate(keys)
    dists = np.concatenate(dists)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    dists = dists[order]
    bins, starts, counts = np.unique(keys, return_index=True, return_counts=True)
    means = [_mean(g) for g in np.split(dists, starts[1:])]
    table = SpeedTable(bins, means, counts)
    if hm_range is None:
        return table
    all_bins = np.arange(hm_bin(hm_range[0]), hm_bin(hm_range[1]) + 1)
    pop = dict(zip(bins.tolist(), zip(means, counts.tolist())))
    filled_means = [pop[b][0] if b in pop else table.lookup_bin(int(b)) for b in all_bins]
    filled_counts = [pop[b][1] if b in pop else 0 for b in all_bins]
    return SpeedTable(all_bins, filled_means, filled_counts)


def observed_deviation(sample, table: SpeedTable) -> float:
    """Mean of (observed step distance - table value at the step's hectometer)."""
    n = sample.n
    return _mean([sample.steps[t, 0] - table(sample.hms[t]) for t in range(n)])


def predict_baseline(kind: str, sample, table: SpeedTable | None, river) -> tuple[np.ndarray, bool]:
    """Predicted positions ``(m, 2)`` and whether the axis end truncated them."""
    if kind not in KINDS:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {KINDS}")
    if kind != "AVGObs" and table is None:
        raise ValueError(f"{kind} needs a speed table")
    axis = river.axis
    h = float(sample.hms[sample.n])
    if kind == "AVGObs":
        observed_mean = _mean(sample.input_steps[:, 0])
    deviation = observed_deviation(sample, table) if kind == "AVGDataObs" else 0.0
    hs = []
    truncated = False
    for _ in range(sample.m):
        if kind == "AVGObs":
            d = observed_mean
        else:
            d = table(h) + deviation
        h = h + max(d, MIN_ADVANCE) / 1000.0
        if h > axis.hm_max:
            h = axis.hm_max
            truncated = True
        hs.append(h)
    return axis.axis_points(np.array(hs)), truncated


def predict_baselines(kind: str, samples: Sequence, table: SpeedTable | None, river) -> tuple[np.ndarray, int]:
    """Batched :func:`predict_baseline`; returns ``(B, m, 2)`` and the truncation count."""
    out = []
    truncated = 0
    for s in samples:
        pos, t = predict_baseline(kind, s, table, river)
        out.append(pos)
        truncated += int(t)
    return np.stack(out), truncated
