"""Downlink SINR, Shannon rate, strongest-server association and
per-UAV connectivity scores under full-frequency-reuse interference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .config import ChannelParams

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class LinkReport:
    vehicle_id: Hashable
    serving_uav: int | None
    sinr: float
    rate: float
    connected: bool


@dataclass(frozen=True)
class Association:
    """Vectorised association result for N vehicles and U UAVs."""

    serving: np.ndarray    # (N,) int, strongest-SINR UAV
    sinr: np.ndarray       # (N,) linear SINR towards the serving UAV
    rate: np.ndarray       # (N,) bits/s, 0 when not connected
    connected: np.ndarray  # (N,) bool
    scores: np.ndarray     # (U,) int, connected vehicles per UAV

    @property
    def throughput_per_uav(self) -> np.ndarray:
        out = np.zeros(len(self.scores))
        np.add.at(out, self.serving[self.connected], self.rate[self.connected])
        return out


def received_power(d, params: ChannelParams):
    return params.beta * params.tx_power * np.power(d, -params.pathloss_exponent)


def sinr(vehicle_pos, serving_uav, interferers, params: ChannelParams) -> float:
    """SINR at a ground vehicle from ``serving_uav`` with every UAV in
    ``interferers`` transmitting on the same band."""
    v = np.array([vehicle_pos[0], vehicle_pos[1], 0.0], dtype=np.float64)
    d = float(np.linalg.norm(np.asarray(serving_uav, dtype=np.float64) - v))
    if d <= 0:
        raise ValueError("zero distance between vehicle and serving UAV")
    interference = 0.0
    for z in interferers:
        dz = float(np.linalg.norm(np.asarray(z, dtype=np.float64) - v))
        if dz <= 0:
            raise ValueError("zero distance between vehicle and an interfering UAV")
        interference += float(received_power(dz, params))
    return float(received_power(d, params)) / (interference + params.noise)


def rate(gamma: float, bandwidth: float) -> float:
    if gamma < 0:
        raise ValueError(f"negative SINR {gamma}")
    return bandwidth * float(np.log2(1.0 + gamma))


def distances(vehicles: np.ndarray, uavs: np.ndarray) -> np.ndarray:
    """(N, U) 3D distances; vehicles sit at ground height 0."""
    vehicles = np.asarray(vehicles, dtype=np.float64).reshape(-1, 2)
    uavs = np.asarray(uavs, dtype=np.float64).reshape(-1, 3)
    dx = vehicles[:, None, 0] - uavs[None, :, 0]
    dy = vehicles[:, None, 1] - uavs[None, :, 1]
    dz = uavs[None, :, 2]
    return np.sqrt(dx * dx + dy * dy + dz * dz)


def associate(vehicles, uavs, params: ChannelParams) -> Association:
    uavs = np.asarray(uavs, dtype=np.float64).reshape(-1, 3)
    n_uav = len(uavs)
    if n_uav == 0:
        raise ValueError("association needs at least one UAV")
    d = distances(vehicles, uavs)
    n = d.shape[0]
    if n == 0:
        empty = np.zeros(0)
        return Association(np.zeros(0, dtype=np.int64), empty, empty,
                           np.zeros(0, dtype=bool), np.zeros(n_uav, dtype=np.int64))
    if np.any(d <= 0):
        raise ValueError("zero distance between a vehicle and a UAV")

    p = received_power(d, params)
    others = 1.0 - np.eye(n_uav)
    if params.interference_range is None:
        interference = p @ others
    else:
        in_range = d <= params.interference_range
        interference = (p * in_range) @ others
    g = p / (interference + params.noise)

    # near-ties (summation-order noise) resolve to the lowest UAV index
    top = g.max(axis=1, keepdims=True)
    serving = np.argmax(g >= top * (1.0 - TIE_RTOL), axis=1)
    best = g[np.arange(n), serving]
    connected = best > params.sinr_threshold
    r = np.where(connected, params.bandwidth * np.log2(1.0 + best), 0.0)
    scores = np.bincount(serving[connected], minlength=n_uav).astype(np.int64)
    return Association(serving, best, r, connected, scores)


def associate_and_score(vehicles: Sequence, uavs: Sequence, params: ChannelParams,
                        vehicle_ids: Sequence[Hashable] | None = None):
    """Per-vehicle link reports plus connectivity score of every UAV."""
    vehicles = np.asarray(vehicles, dtype=np.float64).reshape(-1, 2)
    a = associate(vehicles, uavs, params)
    ids = range(len(vehicles)) if vehicle_ids is None else vehicle_ids
    reports = [
        LinkReport(vid, int(a.serving[i]), float(a.sinr[i]), float(a.rate[i]), bool(a.connected[i]))
        for i, vid in enumerate(ids)
    ]
    return reports, a.scores
