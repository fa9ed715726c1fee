"""River axis with hectometer parametrization and the curvature function.

Hectometers are expressed in river-kilometers (``2231.4`` is hectometer mark
22314). Along the axis they are interpolated linearly in arc length between
vertices.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import CurvatureError, OffRiverError, RangeError
from .geometry import PlanarPosition, ProjectionFrame

MAX_SPEED = 7.7  # m/s, 15 knots
OFF_RIVER_DISTANCE = 2000.0  # m
MIN_RADIUS = 100.0  # m

AXIS_COLUMNS = ("lat", "lon", "hm")
RADII_COLUMNS = ("hm", "radius")


def context_length(n: int, m: int) -> int:
    """Number of curvature samples N+1 in the context window.

    N = floor(7.7 * (n+m) * 60 / 100), evaluated in integers to avoid float
    rounding at the boundary.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    return (462 * (n + m)) // 100 + 1


@dataclass(frozen=True)
class RiverAxis:
    xy: np.ndarray
    hm: np.ndarray

    def __post_init__(self):
        xy = np.ascontiguousarray(self.xy, dtype=np.float64)
        hm = np.ascontiguousarray(self.hm, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2 or len(xy) < 2 or len(hm) != len(xy):
            raise ValueError("axis needs >= 2 vertices with one hectometer each")
        if np.any(np.diff(hm) <= 0):
            raise ValueError("axis hectometers must be strictly increasing")
        if np.any(np.hypot(*np.diff(xy, axis=0).T) == 0):
            raise ValueError("consecutive axis vertices must be distinct")
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "hm", hm)

    @property
    def hm_min(self) -> float:
        return float(self.hm[0])

    @property
    def hm_max(self) -> float:
        return float(self.hm[-1])

    def hm_of_array(self, points, max_distance: float = OFF_RIVER_DISTANCE):
        """Hectometers and lateral distances of many points.

        Raises :class:`OffRiverError` if any point is farther than
        ``max_distance`` from the axis.
        """
        seg, frac, dist = kernels.project_to_polyline(points, self.xy)
        if np.any(dist > max_distance):
            raise OffRiverError(f"point {float(dist.max()):.1f} m from the river axis")
        h = self.hm[seg] + frac * (self.hm[seg + 1] - self.hm[seg])
        return h, dist

    def hm_of(self, pos) -> float:
        h, _ = self.hm_of_array(np.asarray(pos, dtype=np.float64)[None])
        return float(h[0])

    def axis_points(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        if np.any(h < self.hm[0]) or np.any(h > self.hm[-1]) or np.any(~np.isfinite(h)):
            raise RangeError(f"hectometer outside axis range [{self.hm_min}, {self.hm_max}]")
        i = np.clip(np.searchsorted(self.hm, h, side="right") - 1, 0, len(self.hm) - 2)
        t = (h - self.hm[i]) / (self.hm[i + 1] - self.hm[i])
        a = self.xy[i]
        b = self.xy[i + 1]
        return a + t[..., None] * (b - a)

    def axis_point(self, h: float) -> PlanarPosition:
        x, y = self.axis_points(np.array([h]))[0]
        return PlanarPosition(float(x), float(y))


@dataclass(frozen=True)
class RadiiTable:
    """Signed radius per hectometer; ``inf`` marks a straight section."""

    hm: np.ndarray
    radius: np.ndarray

    def __post_init__(self):
        hm = np.asarray(self.hm, dtype=np.float64)
        r = np.asarray(self.radius, dtype=np.float64)
        if hm.shape != r.shape or hm.ndim != 1:
            raise ValueError("hm and radius must be 1-D arrays of equal length")
        if len(hm) and np.any(np.diff(hm) <= 0):
            raise ValueError("radii hectometers must be strictly increasing")
        if np.any(np.isnan(r)) or np.any(np.abs(r) < MIN_RADIUS):
            raise ValueError(f"radii must be >= {MIN_RADIUS} m in magnitude")
        object.__setattr__(self, "hm", hm)
        object.__setattr__(self, "radius", r)

    def __len__(self):
        return len(self.hm)


@dataclass(frozen=True)
class CurvatureFunction:
    """Signed curvature (1/m) sampled per hectometer, linearly interpolated.

    Outside the sampled range the end values are held.
    """

    hm: np.ndarray
    values: np.ndarray

    @property
    def hm_min(self) -> float:
        return float(self.hm[0])

    @property
    def hm_max(self) -> float:
        return float(self.hm[-1])

    def __call__(self, h):
        out = np.interp(h, self.hm, self.values)
        return float(out) if np.ndim(out) == 0 else out


def build_curvature(radii: RadiiTable) -> CurvatureFunction:
    if len(radii) == 0:
        raise CurvatureError("empty radii table")
    # 1/inf == 0 for straight sections
    values = 1.0 / radii.radius
    return CurvatureFunction(radii.hm.copy(), values)


def context_window(h_start: float, n: int, m: int, cv: CurvatureFunction) -> np.ndarray:
    """Curvature every 100 m from ``h_start`` over the 15-knot reach of n+m minutes.

    Hectometers past the end of the curvature range are clamped to the last
    sample.
    """
    if not (cv.hm_min <= h_start <= cv.hm_max) or not math.isfinite(h_start):
        raise RangeError(f"start hectometer {h_start} outside [{cv.hm_min}, {cv.hm_max}]")
    k = np.arange(context_length(n, m))
    h = np.minimum(h_start + 0.1 * k, cv.hm_max)
    return np.asarray(cv(h), dtype=np.float64)


@dataclass
class RiverModel:
    """Axis, radii and curvature function of one river section."""

    axis: RiverAxis
    radii: RadiiTable
    frame: ProjectionFrame
    curvature: CurvatureFunction = field(init=False)

    def __post_init__(self):
        self.curvature = build_curvature(self.radii)

    def hm_of(self, pos) -> float:
        return self.axis.hm_of(pos)

    def axis_point(self, h: float) -> PlanarPosition:
        return self.axis.axis_point(h)

    def context_window(self, h_start: float, n: int, m: int) -> np.ndarray:
        return context_window(h_start, n, m, self.curvature)

    def save(self, directory) -> tuple[Path, Path]:
        """Write ``river_axis.csv`` (lat, lon, hm) and ``river_radii.csv`` (hm, radius).

        Straight sections are written with an empty radius field.
        """
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        lat, lon = self.frame.inverse(self.axis.xy[:, 0], self.axis.xy[:, 1])
        axis_path = d / "river_axis.csv"
        with open(axis_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(AXIS_COLUMNS)
            for row in zip(lat, lon, self.axis.hm):
                w.writerow([repr(float(v)) for v in row])
        radii_path = d / "river_radii.csv"
        with open(radii_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(RADII_COLUMNS)
            for h, r in zip(self.radii.hm, self.radii.radius):
                w.writerow([f"{h:.1f}", "" if math.isinf(r) else repr(float(r))])
        return axis_path, radii_path

    @classmethod
    def load(cls, directory, frame: ProjectionFrame | None = None) -> "RiverModel":
        """Read the two river CSVs.

        Without an explicit frame, a local frame is centred on the mean
        latitude/longitude of the axis vertices.
        """
        d = Path(directory)
        rows = _read_csv(d / "river_axis.csv", AXIS_COLUMNS)
        lat = np.array([float(r["lat"]) for r in rows])
        lon = np.array([float(r["lon"]) for r in rows])
        hm = np.array([float(r["hm"]) for r in rows])
        if frame is None:
            frame = ProjectionFrame(float(np.mean(lat)), float(np.mean(lon)))
        x, y = frame.forward(lat, lon)
        rrows = _read_csv(d / "river_radii.csv", RADII_COLUMNS)
        rhm = np.array([float(r["hm"]) for r in rrows])
        rad = np.array([float(r["radius"]) if r["radius"].strip() else math.inf for r in rrows])
        return cls(RiverAxis(np.column_stack([x, y]), hm), RadiiTable(rhm, rad), frame)


def _read_csv(path: Path, columns) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(columns) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path.name}: missing columns {sorted(missing)}")
        return list(reader)
