"""Ground-user positions per time-step.

Two sources: synthetic static layouts (clustered, crossing roads, edge band)
and floating-car-data traces stored as CSV with the header
``t,vehicle_id,x,y,speed`` (integer seconds, metres, m/s). One trace second
is one simulation time-step. Vehicles missing from a time-step are outside
the region at that step.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .config import ScenarioSpec, WorldConfig, make_rng

log = logging.getLogger(__name__)

TRACE_HEADER = ("t", "vehicle_id", "x", "y", "speed")
MAX_TRACE_SPEED = 50.0 / 3.6  # m/s


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleSnapshot:
    t: int
    ids: tuple[str, ...]
    positions: np.ndarray  # (N, 2)
    speeds: np.ndarray     # (N,)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def entries(self) -> list[tuple[str, float, float, float]]:
        return [(vid, float(p[0]), float(p[1]), float(s))
                for vid, p, s in zip(self.ids, self.positions, self.speeds)]


class StaticProvider:
    """The same snapshot at every time-step; unbounded length."""

    length = None

    def __init__(self, positions: np.ndarray):
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        positions.setflags(write=False)
        speeds = np.zeros(len(positions))
        speeds.setflags(write=False)
        self._ids = tuple(f"u{i}" for i in range(len(positions)))
        self._positions = positions
        self._speeds = speeds

    def snapshot(self, t: int) -> VehicleSnapshot:
        return VehicleSnapshot(t, self._ids, self._positions, self._speeds)

    def __iter__(self) -> Iterator[VehicleSnapshot]:
        t = 0
        while True:
            yield self.snapshot(t)
            t += 1


class TraceProvider:
    """Snapshots t = 0 .. length-1, empty where the trace has no rows."""

    def __init__(self, snapshots: list[VehicleSnapshot], rejected: int = 0):
        self._snapshots = snapshots
        self.rejected = rejected

    @property
    def length(self) -> int:
        return len(self._snapshots)

    def __len__(self) -> int:
        return len(self._snapshots)

    def snapshot(self, t: int) -> VehicleSnapshot:
        return self._snapshots[t]

    def __iter__(self) -> Iterator[VehicleSnapshot]:
        return iter(self._snapshots)


def _truncated_cluster(rng, centre, radius, n, bounds) -> np.ndarray:
    # Gaussian with sigma = radius/2, redrawn outside the radius or the area
    x0, x1, y0, y1 = bounds
    out = np.empty((0, 2))
    while len(out) < n:
        pts = rng.normal(loc=centre, scale=radius / 2.0, size=(2 * (n - len(out)) + 8, 2))
        r = np.hypot(pts[:, 0] - centre[0], pts[:, 1] - centre[1])
        ok = (r <= radius) & (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        out = np.vstack([out, pts[ok]])
    return out[:n]


def _split(n: int, weights) -> list[int]:
    # largest-remainder apportionment so counts sum to n exactly
    raw = np.asarray(weights, dtype=np.float64) * n
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    for k in order[: n - counts.sum()]:
        counts[k] += 1
    return counts.tolist()


def generate_positions(cfg: WorldConfig, spec: ScenarioSpec, seed: int) -> np.ndarray:
    rng = make_rng(seed, 101)
    bounds = (cfg.area_x_min, cfg.area_x_max, cfg.area_y_min, cfg.area_y_max)
    n = spec.n_vehicles
    if spec.kind == "static_clusters":
        for c in spec.clusters:
            cx, cy = c.centre
            if c.radius <= 0 or not (bounds[0] <= cx <= bounds[1] and bounds[2] <= cy <= bounds[3]):
                raise ValueError(f"invalid cluster geometry: centre {c.centre}, radius {c.radius}")
        parts = [
            _truncated_cluster(rng, np.array(c.centre), c.radius, k, bounds)
            for c, k in zip(spec.clusters, _split(n, [c.weight for c in spec.clusters]))
        ]
        return np.vstack(parts) if parts else np.empty((0, 2))
    if spec.kind == "cross_roads":
        cx, cy = spec.crossing or ((bounds[0] + bounds[1]) / 2, (bounds[2] + bounds[3]) / 2)
        half = spec.road_width / 2
        n_h = n // 2
        horiz = np.column_stack([rng.uniform(bounds[0], bounds[1], n_h),
                                 np.clip(rng.uniform(cy - half, cy + half, n_h), bounds[2], bounds[3])])
        vert = np.column_stack([np.clip(rng.uniform(cx - half, cx + half, n - n_h), bounds[0], bounds[1]),
                                rng.uniform(bounds[2], bounds[3], n - n_h)])
        return np.vstack([horiz, vert])
    if spec.kind == "edge_concentration":
        if not 0 < spec.band_width <= bounds[1] - bounds[0]:
            raise ValueError(f"invalid band width {spec.band_width}")
        return np.column_stack([rng.uniform(bounds[1] - spec.band_width, bounds[1], n),
                                rng.uniform(bounds[2], bounds[3], n)])
    raise ValueError(f"no generator for scenario kind {spec.kind!r}")


def generate_scenario(cfg: WorldConfig, spec: ScenarioSpec | None = None, seed: int | None = None):
    """Snapshot provider for a scenario; the trace kind delegates to
    :func:`load_trace`."""
    spec = cfg.scenario if spec is None else spec
    seed = cfg.seed if seed is None else seed
    if spec.kind == "trace":
        return load_trace(spec.trace_path, cfg)
    return StaticProvider(generate_positions(cfg, spec, seed))


def load_trace(path, cfg: WorldConfig | None = None) -> TraceProvider:
    path = Path(path)
    bounds = None if cfg is None else (cfg.area_x_min, cfg.area_x_max, cfg.area_y_min, cfg.area_y_max)
    rows: dict[int, list[tuple[str, float, float, float]]] = {}
    rejected = 0
    last_t = -1
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise TraceError(f"{path}:1: header must be {','.join(TRACE_HEADER)!r}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise TraceError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                t = int(row[0])
                vid = row[1].strip()
                x, y, speed = float(row[2]), float(row[3]), float(row[4])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: malformed row {row!r}") from None
            if not vid or t < 0 or not all(map(math.isfinite, (x, y, speed))) or speed < 0:
                raise TraceError(f"{path}:{lineno}: malformed row {row!r}")
            if t < last_t:
                raise TraceError(f"{path}:{lineno}: timestep {t} after {last_t} (not monotone)")
            last_t = t
            if bounds is not None and not (bounds[0] <= x <= bounds[1] and bounds[2] <= y <= bounds[3]):
                rejected += 1
                continue
            if speed > MAX_TRACE_SPEED + 1e-9:
                rejected += 1
                continue
            bucket = rows.setdefault(t, [])
            if any(e[0] == vid for e in bucket):
                raise TraceError(f"{path}:{lineno}: vehicle {vid!r} appears twice at t={t}")
            bucket.append((vid, x, y, speed))
    if rejected:
        log.warning("%s: rejected %d row(s) outside the area or speed range", path, rejected)
    n_steps = last_t + 1
    snapshots = []
    for t in range(n_steps):
        entries = rows.get(t, [])
        pos = np.array([(e[1], e[2]) for e in entries], dtype=np.float64).reshape(-1, 2)
        spd = np.array([e[3] for e in entries], dtype=np.float64)
        snapshots.append(VehicleSnapshot(t, tuple(e[0] for e in entries), pos, spd))
    return TraceProvider(snapshots, rejected)


def write_trace(path, snapshots) -> None:
    """Inverse of :func:`load_trace`, mainly for tests and scenario export."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for snap in snapshots:
            for vid, x, y, s in snap.entries:
                w.writerow([snap.t, vid, repr(x), repr(y), repr(s)])
