"""AIS records to discretized sequence samples.

Records are interpolated onto a 60 s grid (never across raw gaps above
120 s), cut into sliding windows of n+m+2 grid positions, and turned into
motion steps with integer class labels.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import LabelError
from .geometry import MotionStep, ProjectionFrame, steps_from_array
from .river import RiverModel
from .synth import AisRecord

logger = logging.getLogger(__name__)

GRID_INTERVAL = 60.0
MAX_GAP = 120.0


def round_half_away(x):
    """Round to nearest integer, halves away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class DiscretizationSpec:
    distance_resolution: float = 1.0
    cog_resolution: float = 1.0
    max_distance: float = 464.0

    def __post_init__(self):
        if self.distance_resolution <= 0 or self.cog_resolution <= 0 or self.max_distance <= 0:
            raise ValueError("resolutions and max_distance must be positive")
        if abs(180.0 / self.cog_resolution - round(180.0 / self.cog_resolution)) > 1e-9:
            raise ValueError("cog_resolution must divide 180")

    @property
    def distance_vocab(self) -> int:
        return int(math.floor(self.max_distance / self.distance_resolution + 1e-9)) + 1

    @property
    def cog_offset(self) -> int:
        return int(round(180.0 / self.cog_resolution))

    @property
    def cog_vocab(self) -> int:
        return 2 * self.cog_offset + 1

    @property
    def spec_id(self) -> str:
        return f"d{self.distance_resolution:g}-c{self.cog_resolution:g}-max{self.max_distance:g}"

    def to_dict(self) -> dict:
        return {
            "distance_resolution": self.distance_resolution,
            "cog_resolution": self.cog_resolution,
            "max_distance": self.max_distance,
            "spec_id": self.spec_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscretizationSpec":
        return cls(float(d["distance_resolution"]), float(d["cog_resolution"]), float(d["max_distance"]))

    @classmethod
    def for_horizon(cls, m: int) -> "DiscretizationSpec":
        """1 m distance bins up to 15 predicted steps, 10 m bins beyond."""
        return cls(distance_resolution=1.0 if m <= 15 else 10.0)


def discretize_array(steps, spec: DiscretizationSpec) -> np.ndarray:
    """``(..., 2)`` float steps to ``(..., 2)`` int64 labels."""
    steps = np.asarray(steps, dtype=np.float64)
    d = round_half_away(steps[..., 0] / spec.distance_resolution)
    d = np.clip(d, 0, spec.distance_vocab - 1)
    c = round_half_away(steps[..., 1] / spec.cog_resolution) + spec.cog_offset
    c = np.clip(c, 0, spec.cog_vocab - 1)
    return np.stack([d, c], axis=-1).astype(np.int64)


def dediscretize_array(labels, spec: DiscretizationSpec) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape[-1:] != (2,):
        raise LabelError("labels must have a trailing dimension of 2")
    if (
        np.any(labels[..., 0] < 0)
        or np.any(labels[..., 0] >= spec.distance_vocab)
        or np.any(labels[..., 1] < 0)
        or np.any(labels[..., 1] >= spec.cog_vocab)
    ):
        raise LabelError("label outside vocabulary")
    out = np.empty(labels.shape, dtype=np.float64)
    out[..., 0] = labels[..., 0] * spec.distance_resolution
    out[..., 1] = (labels[..., 1] - spec.cog_offset) * spec.cog_resolution
    return out


def discretize(step: MotionStep, spec: DiscretizationSpec) -> tuple[int, int]:
    d, c = discretize_array(np.asarray(step, dtype=np.float64), spec)
    return int(d), int(c)


def dediscretize(labels: tuple[int, int], spec: DiscretizationSpec) -> MotionStep:
    d, c = dediscretize_array(np.asarray(labels), spec)
    return MotionStep(float(d), float(c))


@dataclass
class Segment:
    """Positions of one vessel on an exact 60 s grid."""

    vessel_id: str
    t: np.ndarray
    xy: np.ndarray

    def __len__(self):
        return len(self.t)


def interpolate(
    records: Sequence[AisRecord],
    frame: ProjectionFrame,
    interval: float = GRID_INTERVAL,
    max_gap: float = MAX_GAP,
) -> list[Segment]:
    """Linear interpolation of one vessel's records onto a regular grid.

    A raw gap longer than ``max_gap`` ends the current segment; the next
    segment's grid restarts at the first record after the gap. Segments with
    fewer than two grid points are dropped.
    """
    if len(records) < 2:
        return []
    t = np.array([r.timestamp for r in records], dtype=np.float64)
    if np.any(np.diff(t) <= 0):
        raise ValueError("records must be sorted with strictly increasing timestamps")
    x, y = frame.forward([r.lat for r in records], [r.lon for r in records])
    breaks = np.flatnonzero(np.diff(t) > max_gap) + 1
    out = []
    for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, len(t)]):
        if hi - lo < 2:
            continue
        ts, xs, ys = t[lo:hi], x[lo:hi], y[lo:hi]
        count = int(math.floor((ts[-1] - ts[0]) / interval + 1e-9)) + 1
        if count < 2:
            continue
        grid = ts[0] + interval * np.arange(count)
        xy = np.column_stack([np.interp(grid, ts, xs), np.interp(grid, ts, ys)])
        out.append(Segment(records[lo].vessel_id, grid, xy))
    return out


@dataclass
class SequenceSample:
    """One training/evaluation window.

    ``positions`` and ``hms`` hold all n+m+2 raw grid positions; ``steps``
    and ``labels`` hold the n+m motion steps (input first, then target).
    """

    traj_id: str
    n: int
    m: int
    positions: np.ndarray
    hms: np.ndarray
    seed_cog: float
    steps: np.ndarray
    labels: np.ndarray
    context: np.ndarray
    spec_id: str = ""
    start_time: float = 0.0

    @property
    def seed_pos(self) -> np.ndarray:
        return self.positions[0]

    @property
    def start_hm(self) -> float:
        return float(self.hms[0])

    @property
    def input_steps(self) -> np.ndarray:
        return self.steps[: self.n]

    @property
    def target_steps(self) -> np.ndarray:
        return self.steps[self.n:]

    @property
    def input_labels(self) -> np.ndarray:
        return self.labels[: self.n]

    @property
    def target_labels(self) -> np.ndarray:
        return self.labels[self.n:]

    @property
    def key(self) -> str:
        return f"{self.traj_id}@{self.start_time:.0f}"

    def to_json(self) -> str:
        return json.dumps(
            {
                "traj_id": self.traj_id,
                "n": self.n,
                "m": self.m,
                "start_time": self.start_time,
                "spec_id": self.spec_id,
                "seed_pos": self.positions[0].tolist(),
                "seed_cog": self.seed_cog,
                "start_hm": self.start_hm,
                "positions": self.positions.tolist(),
                "hms": self.hms.tolist(),
                "steps": self.steps.tolist(),
                "labels": self.labels.tolist(),
                "context": self.context.tolist(),
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "SequenceSample":
        d = json.loads(line)
        return cls(
            traj_id=d["traj_id"],
            n=int(d["n"]),
            m=int(d["m"]),
            positions=np.asarray(d["positions"], dtype=np.float64),
            hms=np.asarray(d["hms"], dtype=np.float64),
            seed_cog=float(d["seed_cog"]),
            steps=np.asarray(d["steps"], dtype=np.float64),
            labels=np.asarray(d["labels"], dtype=np.int64),
            context=np.asarray(d["context"], dtype=np.float64),
            spec_id=d.get("spec_id", ""),
            start_time=float(d.get("start_time", 0.0)),
        )


def extract_samples(
    segment: Segment,
    n: int,
    m: int,
    river: RiverModel,
    spec: DiscretizationSpec,
    stats: dict | None = None,
) -> list[SequenceSample]:
    """Sliding windows (stride 1) of n+m+2 grid positions.

    A window is kept only if all its steps are non-degenerate, all its
    positions are within reach of the axis, and its hectometers increase
    strictly.
    """
    w = n + m + 2
    if len(segment) < w:
        return []
    h, lateral = river.axis.hm_of_array(segment.xy, max_distance=math.inf)
    seg_len = np.hypot(*np.diff(segment.xy, axis=0).T)
    ok_pos = lateral <= 2000.0
    ok_step = (seg_len > 0) & (np.diff(h) > 0) & ok_pos[:-1] & ok_pos[1:]
    # window i covers steps i .. i+w-2
    bad = np.concatenate([[0], np.cumsum(~ok_step)])
    starts = np.arange(len(segment) - w + 1)
    valid = starts[(bad[starts + w - 1] - bad[starts]) == 0]
    if stats is not None:
        stats["windows"] = stats.get("windows", 0) + len(starts)
        stats["rejected"] = stats.get("rejected", 0) + len(starts) - len(valid)
    if len(valid) == 0:
        return []
    win = np.stack([segment.xy[i:i + w] for i in valid])
    seed, dist, change = steps_from_array(win)
    steps = np.stack([dist[:, : n + m], change[:, : n + m]], axis=-1)
    labels = discretize_array(steps, spec)
    out = []
    for j, i in enumerate(valid):
        hms = h[i:i + w].copy()
        out.append(
            SequenceSample(
                traj_id=segment.vessel_id,
                n=n,
                m=m,
                positions=win[j],
                hms=hms,
                seed_cog=float(seed[j]),
                steps=steps[j],
                labels=labels[j],
                context=river.context_window(float(hms[0]), n, m),
                spec_id=spec.spec_id,
                start_time=float(segment.t[i]),
            )
        )
    return out


def group_records(records: Iterable[AisRecord]) -> dict[str, list[AisRecord]]:
    """Records per vessel, time-sorted, with duplicate timestamps dropped."""
    groups: dict[str, list[AisRecord]] = defaultdict(list)
    for r in records:
        groups[r.vessel_id].append(r)
    out = {}
    for vid in sorted(groups):
        recs = sorted(groups[vid], key=lambda r: r.timestamp)
        dedup = [recs[0]]
        for r in recs[1:]:
            if r.timestamp > dedup[-1].timestamp:
                dedup.append(r)
        out[vid] = dedup
    return out


def build_samples(
    records: Iterable[AisRecord],
    river: RiverModel,
    n: int,
    m: int,
    spec: DiscretizationSpec,
) -> tuple[list[SequenceSample], dict]:
    """Full record-to-sample pass over all vessels. Returns samples and counts."""
    stats = {"vessels": 0, "segments": 0, "windows": 0, "rejected": 0}
    samples: list[SequenceSample] = []
    for vid, recs in group_records(records).items():
        stats["vessels"] += 1
        for seg in interpolate(recs, river.frame):
            stats["segments"] += 1
            samples.extend(extract_samples(seg, n, m, river, spec, stats))
    stats["samples"] = len(samples)
    logger.info("extracted %d samples from %d segments", len(samples), stats["segments"])
    return samples, stats


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)


def largest_remainder(total: int, fractions: Sequence[float]) -> list[int]:
    raw = [f * total for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def split(
    samples: Sequence[SequenceSample],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    by_trajectory: bool = False,
) -> DatasetSplit:
    """Deterministic shuffled train/validation/test split.

    With ``by_trajectory`` whole trajectories are assigned to one set (the
    fractions then apply to trajectory counts), so overlapping windows of one
    passage never straddle sets.
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError("fractions must be three non-negative values summing to 1")
    if not samples:
        return DatasetSplit()
    rng = np.random.default_rng(seed)
    if by_trajectory:
        ids = sorted({s.traj_id for s in samples})
        perm = rng.permutation(len(ids))
        counts = largest_remainder(len(ids), fractions)
        assign = {}
        pos = 0
        for k, c in enumerate(counts):
            for j in perm[pos:pos + c]:
                assign[ids[j]] = k
            pos += c
        parts = [[], [], []]
        for s in samples:
            parts[assign[s.traj_id]].append(s)
        return DatasetSplit(*parts)
    perm = rng.permutation(len(samples))
    counts = largest_remainder(len(samples), fractions)
    a, b = counts[0], counts[0] + counts[1]
    return DatasetSplit(
        [samples[i] for i in perm[:a]],
        [samples[i] for i in perm[a:b]],
        [samples[i] for i in perm[b:]],
    )


def write_samples(path, samples: Iterable[SequenceSample]) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        for s in samples:
            f.write(s.to_json())
            f.write("\n")
    return path


def read_samples(path) -> list[SequenceSample]:
    with open(path) as f:
        return [SequenceSample.from_json(line) for line in f if line.strip()]
