"""Synthetic rivers and AIS-like vessel tracks.

Rivers are built from a curvature profile that is piecewise linear in arc
length with knots on hectometer marks: straights, linear ramps (clothoid
transitions) and constant-radius arcs. The radii table is read straight off
the profile, so linear interpolation of the inverted radii reproduces the
axis curvature exactly.

Vessels travel uphill along the axis at a fixed lateral offset, slowing down
in bends, with AR(1) speed noise and jittered report intervals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import GenerationError
from .geometry import ProjectionFrame
from .river import MAX_SPEED, RadiiTable, RiverAxis, RiverModel

CELL = 100.0  # m per hectometer
VERTEX_SPACING = 10.0  # m
AIS_COLUMNS = ("vessel_id", "timestamp", "lat", "lon", "cog", "sog")


@dataclass(frozen=True)
class SyntheticRiverSpec:
    length_km: float = 80.0
    min_radius: float = 300.0
    bend_count: int = 40
    seed: int = 0
    max_radius: float | None = None  # defaults to 4 * min_radius
    min_bend_angle: float = 30.0  # degrees
    max_bend_angle: float = 80.0
    ramp_m: float = 200.0
    start_hm: float = 0.0
    origin_lat: float = 48.75
    origin_lon: float = 12.95

    def validate(self):
        if not self.length_km > 1:
            raise GenerationError("length_km must exceed 1")
        if not self.min_radius >= 250:
            raise GenerationError("min_radius must be at least 250 m")
        if self.max_radius is not None and self.max_radius < self.min_radius:
            raise GenerationError("max_radius below min_radius")
        if self.bend_count < 0:
            raise GenerationError("bend_count must be non-negative")
        if self.ramp_m < 0 or self.ramp_m % CELL:
            raise GenerationError("ramp_m must be a non-negative multiple of 100 m")
        if not 0 < self.min_bend_angle <= self.max_bend_angle <= 150:
            raise GenerationError("bend angles must satisfy 0 < min <= max <= 150")


@dataclass(frozen=True)
class VesselSpec:
    base_speed: float = 3.5  # m/s
    curvature_slowdown: float = 0.3
    lateral_offset: float = 0.0  # m, positive to starboard
    noise_scale: float = 0.05
    report_interval: float = 30.0  # s
    gap_probability: float = 0.0
    noise_time_constant: float = 300.0  # s

    def validate(self):
        if not 2.0 <= self.base_speed <= MAX_SPEED:
            raise GenerationError("base_speed must lie in [2, 7.7] m/s")
        if self.curvature_slowdown < 0:
            raise GenerationError("curvature_slowdown must be non-negative")
        if self.base_speed * (1.0 - self.curvature_slowdown) <= 0:
            raise GenerationError("curvature_slowdown drives the speed to zero in the tightest bend")
        if self.noise_scale < 0 or self.noise_scale >= 1:
            raise GenerationError("noise_scale must lie in [0, 1)")
        if not 10.0 <= self.report_interval <= 120.0:
            raise GenerationError("report_interval must lie in [10, 120] s")
        if not 0.0 <= self.gap_probability < 1.0:
            raise GenerationError("gap_probability must lie in [0, 1)")


class AisRecord(NamedTuple):
    vessel_id: str
    timestamp: float
    lat: float
    lon: float
    cog: float
    sog: float


def _curvature_profile(spec: SyntheticRiverSpec, rng: np.random.Generator) -> np.ndarray:
    """Signed curvature at every hectometer mark."""
    cells = int(round(spec.length_km * 1000.0 / CELL))
    kappa = np.zeros(cells + 1)
    if spec.bend_count == 0:
        return kappa
    ramp = int(spec.ramp_m // CELL)
    rmax = spec.max_radius if spec.max_radius is not None else 4.0 * spec.min_radius
    min_gap = 2
    sign = 1.0 if rng.random() < 0.5 else -1.0
    bends = []
    for _ in range(spec.bend_count):
        radius = rng.uniform(spec.min_radius, rmax)
        angle = math.radians(rng.uniform(spec.min_bend_angle, spec.max_bend_angle))
        # the ramps contribute half their length at full curvature
        arc = max(1, int(round((angle * radius - ramp * CELL) / CELL)))
        bends.append((sign / radius, arc))
        sign = -sign
    used = sum(2 * ramp + arc for _, arc in bends)
    free = cells - used - (spec.bend_count + 1) * min_gap
    if free < 0:
        raise GenerationError(
            f"{spec.bend_count} bends need {used + (spec.bend_count + 1) * min_gap} hm, "
            f"river has {cells}"
        )
    extra = rng.multinomial(free, np.full(spec.bend_count + 1, 1.0 / (spec.bend_count + 1)))
    pos = 0
    for (k, arc), gap in zip(bends, extra[:-1]):
        pos += min_gap + int(gap)
        for j in range(ramp + 1):
            kappa[pos + j] = k * j / ramp if ramp else k
        kappa[pos + ramp: pos + ramp + arc + 1] = k
        for j in range(ramp + 1):
            kappa[pos + ramp + arc + j] = k * (ramp - j) / ramp if ramp else k
        pos += 2 * ramp + arc
    return kappa


def generate_river(spec: SyntheticRiverSpec) -> RiverModel:
    """Deterministic synthetic river section.

    The axis is sampled every 10 m; its hectometers equal ``start_hm`` plus arc
    length in km. The projection frame is centred on the origin given in the
    spec, which coincides with the axis centroid.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    kappa = _curvature_profile(spec, rng)
    cells = len(kappa) - 1
    length = cells * CELL
    # heading (radians) is the exact integral of the piecewise-linear curvature
    ds = 1.0
    s_mid = np.arange(0.0, length, ds) + 0.5 * ds
    knots = np.arange(cells + 1) * CELL
    heading0 = rng.uniform(0.0, 2.0 * math.pi)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * CELL)])
    idx = np.minimum((s_mid // CELL).astype(int), cells - 1)
    u = s_mid - knots[idx]
    theta = heading0 + cum[idx] + kappa[idx] * u + 0.5 * (kappa[idx + 1] - kappa[idx]) * u * u / CELL
    x = np.concatenate([[0.0], np.cumsum(np.sin(theta) * ds)])
    y = np.concatenate([[0.0], np.cumsum(np.cos(theta) * ds)])
    step = int(VERTEX_SPACING / ds)
    xy = np.column_stack([x[::step], y[::step]])
    xy -= xy.mean(axis=0)
    hm = spec.start_hm + np.arange(len(xy)) * VERTEX_SPACING / 1000.0
    radius = np.where(kappa == 0.0, math.inf, 1.0 / np.where(kappa == 0.0, 1.0, kappa))
    radii = RadiiTable(np.round(spec.start_hm + knots / 1000.0, 1), radius)
    frame = ProjectionFrame(spec.origin_lat, spec.origin_lon)
    return RiverModel(RiverAxis(xy, hm), radii, frame)


def _vertex_headings(axis: RiverAxis) -> np.ndarray:
    """Unwrapped heading (radians, clockwise from north) at each axis vertex."""
    d = np.diff(axis.xy, axis=0)
    seg = np.unwrap(np.arctan2(d[:, 0], d[:, 1]))
    out = np.empty(len(axis.xy))
    out[0] = seg[0]
    out[-1] = seg[-1]
    out[1:-1] = 0.5 * (seg[:-1] + seg[1:])
    return out


def river_min_radius(river: RiverModel) -> float:
    r = np.abs(river.radii.radius)
    finite = r[np.isfinite(r)]
    return float(finite.min()) if len(finite) else math.inf


def generate_trajectory(
    river: RiverModel,
    vessel: VesselSpec,
    start_hm: float,
    seed: int,
    duration: float | None = None,
    vessel_id: str = "v0",
    t0: float = 0.0,
    end_margin_km: float = 0.1,
) -> list[AisRecord]:
    """Simulate one uphill passage and emit AIS records.

    Ground speed is ``base_speed * (1 - curvature_slowdown * |cv(h)| * r_min)``
    scaled by ``1 + noise_scale * e`` with ``e`` a unit-variance AR(1) process,
    capped at 7.7 m/s. The passage ends after ``duration`` seconds or near the
    upper end of the axis.
    """
    vessel.validate()
    axis = river.axis
    if not axis.hm_min <= start_hm < axis.hm_max - end_margin_km:
        raise GenerationError(f"start_hm {start_hm} outside the navigable range")
    rng = np.random.default_rng(seed)
    cv = river.curvature
    rmin = river_min_radius(river)
    slow = 0.0 if math.isinf(rmin) else vessel.curvature_slowdown * rmin
    hm_list = axis.hm.tolist()
    kappa_list = np.asarray(cv(axis.hm)).tolist()
    h0 = hm_list[0]
    dh_vertex = (hm_list[-1] - h0) / (len(hm_list) - 1)
    h_end = axis.hm_max - end_margin_km
    t_end = math.inf if duration is None else t0 + duration
    offset = vessel.lateral_offset
    tau = vessel.noise_time_constant
    max_sub = 5.0

    def kappa_at(h):
        f = (h - h0) / dh_vertex
        i = min(int(f), len(kappa_list) - 2)
        w = f - i
        return kappa_list[i] * (1.0 - w) + kappa_list[i + 1] * w

    def speed_at(h, e):
        k = kappa_at(h)
        v = vessel.base_speed * (1.0 - slow * abs(k)) * (1.0 + vessel.noise_scale * e)
        return min(max(v, 0.05), MAX_SPEED), k

    e = float(rng.standard_normal())
    h = float(start_hm)
    t = float(t0)
    times, hms, speeds = [t], [h], [speed_at(h, e)[0]]
    while True:
        if rng.random() < vessel.gap_probability:
            interval = rng.uniform(180.0, 600.0)
        else:
            interval = vessel.report_interval * rng.uniform(0.8, 1.2)
        t_next = t + interval
        if t_next > t_end:
            break
        remaining = interval
        while remaining > 1e-12:
            dt = min(max_sub, remaining)
            v, k = speed_at(h, e)
            h += v * dt / (1.0 - k * offset) / 1000.0
            phi = math.exp(-dt / tau)
            e = phi * e + math.sqrt(1.0 - phi * phi) * float(rng.standard_normal())
            remaining -= dt
            if h >= h_end:
                break
        if h >= h_end:
            break
        t = t_next
        times.append(t)
        hms.append(h)
        speeds.append(speed_at(h, e)[0])

    hms_arr = np.array(hms)
    base = axis.axis_points(hms_arr)
    heading = np.interp(hms_arr, axis.hm, _vertex_headings(axis))
    # starboard normal of a heading measured clockwise from north
    pos = base + offset * np.column_stack([np.cos(heading), -np.sin(heading)])
    lat, lon = river.frame.inverse(pos[:, 0], pos[:, 1])
    cog = np.mod(np.degrees(heading), 360.0)
    return [
        AisRecord(vessel_id, float(ti), float(la), float(lo), float(c), float(s))
        for ti, la, lo, c, s in zip(times, lat, lon, cog, speeds)
    ]


@dataclass(frozen=True)
class FleetSpec:
    """Ranges from which per-vessel specs are drawn."""

    vessels: int = 60
    base_speed: tuple[float, float] = (2.5, 4.5)
    curvature_slowdown: tuple[float, float] = (0.3, 0.6)
    lateral_offset: tuple[float, float] = (-60.0, 60.0)
    noise_scale: tuple[float, float] = (0.03, 0.08)
    report_interval: tuple[float, float] = (10.0, 60.0)
    gap_probability: float = 0.0
    start_fraction: float = 0.5  # starts drawn from the lower part of the river
    trip_minutes: tuple[float, float] | None = None  # None: every passage runs to the river end
    seed: int = 1


def generate_fleet(river: RiverModel, fleet: FleetSpec) -> list[AisRecord]:
    """Records of ``fleet.vessels`` independent passages, sorted per vessel."""
    rng = np.random.default_rng(fleet.seed)
    span = river.axis.hm_max - river.axis.hm_min
    records: list[AisRecord] = []
    for i in range(fleet.vessels):
        spec = VesselSpec(
            base_speed=float(rng.uniform(*fleet.base_speed)),
            curvature_slowdown=float(rng.uniform(*fleet.curvature_slowdown)),
            lateral_offset=float(rng.uniform(*fleet.lateral_offset)),
            noise_scale=float(rng.uniform(*fleet.noise_scale)),
            report_interval=float(rng.uniform(*fleet.report_interval)),
            gap_probability=fleet.gap_probability,
        )
        start = river.axis.hm_min + float(rng.uniform(0.0, fleet.start_fraction)) * span
        t0 = float(rng.integers(0, 86400 * 30))
        duration = None
        if fleet.trip_minutes is not None:
            duration = 60.0 * float(rng.uniform(*fleet.trip_minutes))
        records.extend(
            generate_trajectory(
                river, spec, start, int(rng.integers(2**31)), duration=duration, vessel_id=f"v{i:04d}", t0=t0
            )
        )
    return records


def write_ais_csv(path, records) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(AIS_COLUMNS)
        for r in records:
            w.writerow([r.vessel_id] + [repr(float(v)) for v in r[1:]])
    return path


def read_ais_csv(path) -> list[AisRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(AIS_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"AIS file missing columns {sorted(missing)}")
        return [
            AisRecord(
                row["vessel_id"],
                float(row["timestamp"]),
                float(row["lat"]),
                float(row["lon"]),
                float(row["cog"]),
                float(row["sog"]),
            )
            for row in reader
        ]


def spec_dict(spec) -> dict:
    return asdict(spec)
