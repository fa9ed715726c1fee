"""Planar frame, courses, motion steps and dead reckoning.

Courses are degrees clockwise from north in ``[0, 360)``. A motion step is the
distance travelled in one interval plus the signed course change that follows
it (positive = clockwise).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from pyproj import Transformer

from . import kernels
from .errors import DegenerateStepError, ProjectionError, UndefinedBearingError


class PlanarPosition(NamedTuple):
    x: float
    y: float


class MotionStep(NamedTuple):
    distance: float
    cog_diff: float


@functools.lru_cache(maxsize=32)
def _transformers(lat0: float, lon0: float) -> tuple[Transformer, Transformer]:
    proj = (
        f"+proj=tmerc +lat_0={lat0!r} +lon_0={lon0!r} +k=1 +x_0=0 +y_0=0 "
        "+ellps=WGS84 +units=m +no_defs"
    )
    fwd = Transformer.from_crs("EPSG:4326", proj, always_xy=True)
    inv = Transformer.from_crs(proj, "EPSG:4326", always_xy=True)
    return fwd, inv


def _apply(transformer, a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 1:
        # pyproj routes single-element arrays through its scalar path
        u, v = transformer.transform(float(a.ravel()[0]), float(b.ravel()[0]))
        return np.full(a.shape, u), np.full(b.shape, v)
    u, v = transformer.transform(a, b)
    return np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)


@dataclass(frozen=True)
class ProjectionFrame:
    """Local transverse Mercator frame centred on ``(origin_lat, origin_lon)``.

    Valid within ``max_extent_deg`` degrees of latitude and of
    cos(lat)-scaled longitude from the origin, which keeps the scale factor
    error far below 0.1%.
    """

    origin_lat: float
    origin_lon: float
    frame_id: str = ""
    max_extent_deg: float = 1.0

    def __post_init__(self):
        if not (-80.0 < self.origin_lat < 80.0) or not (-180.0 <= self.origin_lon <= 180.0):
            raise ProjectionError(f"frame origin out of range: {self.origin_lat}, {self.origin_lon}")
        if not self.frame_id:
            object.__setattr__(
                self, "frame_id", f"tmerc:{self.origin_lat:.6f}:{self.origin_lon:.6f}"
            )

    def _check(self, lat, lon):
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        dlon = (lon - self.origin_lon + 180.0) % 360.0 - 180.0
        coslat = math.cos(math.radians(self.origin_lat))
        bad = (
            ~np.isfinite(lat)
            | ~np.isfinite(lon)
            | (np.abs(lat - self.origin_lat) > self.max_extent_deg)
            | (np.abs(dlon) * coslat > self.max_extent_deg)
        )
        if np.any(bad):
            raise ProjectionError("coordinates outside the projection frame region")
        return lat, lon

    def forward(self, lat, lon) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized lat/lon (degrees) to planar x/y (meters)."""
        lat, lon = self._check(lat, lon)
        fwd, _ = _transformers(self.origin_lat, self.origin_lon)
        return _apply(fwd, lon, lat)

    def inverse(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized planar x/y to (lat, lon)."""
        _, inv = _transformers(self.origin_lat, self.origin_lon)
        lon, lat = _apply(inv, x, y)
        return lat, lon

    def to_dict(self) -> dict:
        return {
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "frame_id": self.frame_id,
            "max_extent_deg": self.max_extent_deg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionFrame":
        return cls(
            float(d["origin_lat"]),
            float(d["origin_lon"]),
            d.get("frame_id", ""),
            float(d.get("max_extent_deg", 1.0)),
        )


def to_planar(lat: float, lon: float, frame: ProjectionFrame) -> PlanarPosition:
    x, y = frame.forward(lat, lon)
    return PlanarPosition(float(x), float(y))


def bearing(a: Sequence[float], b: Sequence[float]) -> float:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    if dx == 0 and dy == 0:
        raise UndefinedBearingError(f"bearing undefined for identical points {tuple(a)}")
    return float(kernels.bearings(dx, dy))


def cog_diff(c1: float, c2: float) -> float:
    """Signed shortest rotation from course ``c1`` to ``c2``.

    The result lies in ``(-180, 180]``; an exact half turn counts as clockwise.
    """
    return float(kernels.cog_diff(c1, c2))


def steps_from_positions(positions) -> tuple[float, list[MotionStep]]:
    """Seed course and motion steps of a polyline of K+2 positions.

    Returns K+1 steps. Step t carries the distance p_t -> p_{t+1} and the
    course change from leg t to leg t+1; the last step has no following leg,
    so its course change is 0 by convention.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 3:
        raise ValueError("need at least 3 positions of shape (K+2, 2)")
    seed, dist, change = steps_from_array(pos[None])
    return float(seed[0]), [MotionStep(float(d), float(c)) for d, c in zip(dist[0], change[0])]


def steps_from_array(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched form of :func:`steps_from_positions` on a ``(B, K+2, 2)`` array."""
    pos = np.asarray(positions, dtype=np.float64)
    seg = np.diff(pos, axis=1)
    if np.any((seg[..., 0] == 0) & (seg[..., 1] == 0)):
        raise DegenerateStepError("repeated consecutive positions")
    return kernels.steps_batch(pos)


def reconstruct(seed_pos, seed_cog: float, steps) -> list[PlanarPosition]:
    """Dead-reckon the positions after each step starting from a seed pose."""
    arr = np.asarray(steps, dtype=np.float64).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("steps must be non-empty")
    out = reconstruct_array(
        np.asarray(seed_pos, dtype=np.float64)[None], np.array([seed_cog]), arr[None]
    )[0]
    return [PlanarPosition(float(x), float(y)) for x, y in out]


def reconstruct_array(seed_pos, seed_cog, steps) -> np.ndarray:
    """Batched :func:`reconstruct`.

    Args:
        seed_pos: ``(B, 2)``.
        seed_cog: ``(B,)`` degrees.
        steps: ``(B, K, 2)`` of (distance, course change).

    Returns:
        ``(B, K, 2)`` positions.
    """
    steps = np.asarray(steps, dtype=np.float64)
    return kernels.reconstruct_batch(
        np.asarray(seed_pos, dtype=np.float64),
        np.asarray(seed_cog, dtype=np.float64),
        np.ascontiguousarray(steps[..., 0]),
        np.ascontiguousarray(steps[..., 1]),
    )
