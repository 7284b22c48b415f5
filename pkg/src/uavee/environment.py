"""Multi-UAV world: joint moves under area bounds, association and scoring,
battery drain, neighbour exchange, density memory, rewards and observations.

Each step follows a fixed order: move (out-of-area moves are rejected and
the UAV hovers), advance the vehicle snapshot, associate, charge propulsion
energy, exchange neighbour reports, compute rewards against the memory as it
stood before this step, update the best-score memory, then build the
observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import channel, energy
from .agent import observation_size
from .config import WorldConfig, default_initial_positions


class Action(IntEnum):
    PLUS_X = 0
    MINUS_X = 1
    PLUS_Y = 2
    MINUS_Y = 3
    HOVER = 4


MOVES = np.array([(1, 0), (-1, 0), (0, 1), (0, -1), (0, 0)], dtype=np.float64)


class EpisodeError(RuntimeError):
    pass


@dataclass
class UavState:
    position: np.ndarray
    battery: energy.BatteryState
    score: int = 0
    prev_score: int = 0
    prev_step_energy: float = 0.0
    best_score: int = 0
    best_position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    neighbourhood_score: int = 0
    prev_neighbourhood_score: int = 0
    best_neighbourhood_score: int = 0

    @property
    def alive(self) -> bool:
        return self.battery.alive

    @property
    def step_energy(self) -> float:
        return self.battery.last_step_energy


@dataclass(frozen=True)
class NeighborReport:
    index: int
    distance: float
    score: int
    step_energy: float


def energy_ratio(e_prev: float, e_now: float) -> float:
    """(e_prev - e_now) / (e_now + e_prev), 0 when both are 0."""
    total = e_now + e_prev
    return 0.0 if total == 0 else (e_prev - e_now) / total


def _ratio(num: float, den: float) -> float:
    return 0.0 if den == 0 else num / den


def cooperative_factor(co_now: float, co_prev: float, co_best: float) -> float:
    if co_best == 0:
        return 0.0
    share = co_now / co_best
    return share if co_now > co_prev else -share


def reward(c_now: int, c_prev: int, c_best: int, e_now: float, e_prev: float,
           coop: float) -> float:
    base = coop + energy_ratio(e_prev, e_now)
    if c_now > c_prev:
        return base + _ratio(c_now, c_best)
    if c_now == c_prev:
        return base
    return base - _ratio(c_now, c_best)


class UavEnvironment:
    """Decentralised multi-UAV coverage world.

    ``cooperative=False`` drops the neighbourhood factor from every reward.
    The best-score memory (C*, x*, y*, C_o*) persists across :meth:`reset`
    unless ``reset(keep_memory=False)`` is requested.
    """

    def __init__(self, cfg: WorldConfig, provider, cooperative: bool = True):
        self.cfg = cfg
        self.provider = provider
        self.cooperative = cooperative
        self.K = cfg.learning.n_neighbors
        self.obs_size = observation_size(self.K)
        self._lo = np.array([cfg.area_x_min, cfg.area_y_min])
        self._hi = np.array([cfg.area_x_max, cfg.area_y_max])
        self._size = self._hi - self._lo
        p_hover = energy.propulsion_power(0.0, cfg.energy)
        p_move = energy.propulsion_power(cfg.max_speed, cfg.energy)
        # only two speeds are reachable (hover or a full step)
        self.energy_scale = max(p_hover, p_move) * cfg.step_duration
        self.initial_positions = default_initial_positions(cfg)
        length = provider.length
        self.episode_length = cfg.max_steps if length is None else min(cfg.max_steps, max(length - 1, 0))
        self.uavs: list[UavState] = []
        self.t = 0
        self.active = False
        self._memory_ready = False
        self.truncated = self.episode_length < cfg.max_steps

    # -- episode control -------------------------------------------------

    def reset(self, keep_memory: bool = True) -> list[np.ndarray]:
        cfg = self.cfg
        old = self.uavs if (keep_memory and self._memory_ready) else None
        self.uavs = []
        for j, (x, y) in enumerate(self.initial_positions):
            u = UavState(position=np.array([x, y, cfg.uav_altitude], dtype=np.float64),
                         battery=energy.BatteryState(cfg.energy.battery_capacity),
                         best_position=np.array([x, y], dtype=np.float64))
            if old is not None:
                u.best_score = old[j].best_score
                u.best_position = old[j].best_position.copy()
                u.best_neighbourhood_score = old[j].best_neighbourhood_score
            self.uavs.append(u)
        self.t = 0
        self.active = self.episode_length > 0
        self.snapshot = self.provider.snapshot(0)
        alive = list(range(cfg.n_uavs))
        self.assoc = self._associate(alive)
        for j, c in zip(alive, self.assoc.scores):
            self.uavs[j].score = self.uavs[j].prev_score = int(c)
        self.messages = self._exchange(alive)
        for j in alive:
            u = self.uavs[j]
            u.prev_neighbourhood_score = u.neighbourhood_score
            self._update_memory(u)
        self._memory_ready = True
        return [self.observe(j) for j in range(cfg.n_uavs)]

    @property
    def alive_indices(self) -> list[int]:
        return [j for j, u in enumerate(self.uavs) if u.alive]

    def step(self, actions: Sequence[int | None]):
        """Advance one time-step.

        ``actions`` has one entry per UAV: an action id for every alive UAV
        and ``None`` for dead ones. Returns ``(observations, rewards, dones,
        log)``; entries for UAVs that were already dead are ``None``.
        """
        if not self.active:
            raise EpisodeError("episode has terminated; call reset()")
        cfg = self.cfg
        n = cfg.n_uavs
        if len(actions) != n:
            raise ValueError(f"expected {n} actions, got {len(actions)}")
        acting = self.alive_indices
        for j in range(n):
            if self.uavs[j].alive and actions[j] is None:
                raise ValueError(f"missing action for alive UAV {j}")
            if not self.uavs[j].alive and actions[j] is not None:
                raise EpisodeError(f"action given for dead UAV {j}")
            if actions[j] is not None and not 0 <= int(actions[j]) < len(MOVES):
                raise ValueError(f"invalid action {actions[j]} for UAV {j}")

        # (1) moves, rejected if they would leave the area
        speeds = np.zeros(n)
        for j in acting:
            a = int(actions[j])
            u = self.uavs[j]
            new = u.position[:2] + MOVES[a] * cfg.uav_step_size
            if np.all(new >= self._lo) and np.all(new <= self._hi):
                disp = float(np.linalg.norm(new - u.position[:2]))
                u.position[:2] = new
                speeds[j] = disp / cfg.step_duration

        # (2) vehicles, (3) association
        self.t += 1
        self.snapshot = self.provider.snapshot(self.t)
        self.assoc = self._associate(acting)
        throughput = np.zeros(n)
        tp = self.assoc.throughput_per_uav
        for k, j in enumerate(acting):
            u = self.uavs[j]
            u.prev_score = u.score
            u.score = int(self.assoc.scores[k])
            throughput[j] = tp[k] * cfg.step_duration

        # (4) energy
        energies = np.zeros(n)
        for j in acting:
            u = self.uavs[j]
            u.prev_step_energy = u.battery.last_step_energy
            e = energy.step_energy(float(speeds[j]), cfg.step_duration, cfg.energy)
            u.battery = energy.consume(u.battery, e)
            energies[j] = e

        # (5) neighbour exchange among the UAVs that flew this step
        for j in acting:
            self.uavs[j].prev_neighbourhood_score = self.uavs[j].neighbourhood_score
        self.messages = self._exchange(acting)

        # (6) rewards against pre-update memory, then (7) memory update
        rewards: list[float | None] = [None] * n
        for j in acting:
            u = self.uavs[j]
            coop = (cooperative_factor(u.neighbourhood_score, u.prev_neighbourhood_score,
                                       u.best_neighbourhood_score) if self.cooperative else 0.0)
            rewards[j] = reward(u.score, u.prev_score, u.best_score, u.step_energy,
                                u.prev_step_energy, coop)
        for j in acting:
            self._update_memory(self.uavs[j])

        # (8) observations
        out_of_time = self.t >= self.episode_length
        obs: list[np.ndarray | None] = [None] * n
        dones: list[bool | None] = [None] * n
        for j in acting:
            obs[j] = self.observe(j)
            dones[j] = out_of_time or not self.uavs[j].alive
        if out_of_time or not self.alive_indices:
            self.active = False

        log = {
            "t": self.t,
            "positions": [u.position[:2].tolist() for u in self.uavs],
            "alive": [j in acting for j in range(n)],
            "died": [j in acting and not self.uavs[j].alive for j in range(n)],
            "actions": [None if a is None else int(a) for a in actions],
            "speeds": speeds.tolist(),
            "energies": energies.tolist(),
            "scores": [self.uavs[j].score if j in acting else 0 for j in range(n)],
            "throughput": throughput.tolist(),
            "deployed": len(self.snapshot),
            "connected": int(self.assoc.scores.sum()),
            "messages": sum(self.messages.values()),
            "rewards": rewards,
        }
        return obs, rewards, dones, log

    # -- pieces ----------------------------------------------------------

    def _associate(self, idx: list[int]) -> channel.Association:
        pos = np.array([self.uavs[j].position for j in idx]).reshape(-1, 3)
        return channel.associate(self.snapshot.positions, pos, self.cfg.channel)

    def neighbours(self, j: int, pool: list[int] | None = None) -> list[NeighborReport]:
        """All UAVs within communication range of ``j``, nearest first."""
        pool = self.alive_indices if pool is None else pool
        me = self.uavs[j].position
        out = []
        for k in pool:
            if k == j:
                continue
            d = float(np.linalg.norm(self.uavs[k].position - me))
            if d <= self.cfg.learning.comm_range:
                out.append(NeighborReport(k, d, self.uavs[k].score, self.uavs[k].step_energy))
        out.sort(key=lambda r: (r.distance, r.index))
        return out

    def _exchange(self, pool: list[int]) -> dict[int, int]:
        counts = {}
        self._reports = {}
        for j in pool:
            reports = self.neighbours(j, pool)
            self._reports[j] = reports
            counts[j] = len(reports)
            self.uavs[j].neighbourhood_score = self.neighbourhood_score(j, reports)
        return counts

    def neighbourhood_score(self, j: int, reports: list[NeighborReport]) -> int:
        # the UAV counts itself as part of its neighbourhood
        return self.uavs[j].score + sum(r.score for r in reports)

    @staticmethod
    def _update_memory(u: UavState) -> None:
        if u.score > u.best_score:
            u.best_score = u.score
            u.best_position = u.position[:2].copy()
        if u.neighbourhood_score > u.best_neighbourhood_score:
            u.best_neighbourhood_score = u.neighbourhood_score

    def message_count(self) -> int:
        return sum(self.messages.values())

    def observe(self, j: int) -> np.ndarray:
        cfg = self.cfg
        u = self.uavs[j]
        n_veh = len(self.snapshot)
        obs = np.zeros(self.obs_size)
        obs[0] = (u.position[0] - cfg.area_x_min) / self._size[0]
        obs[1] = (u.position[1] - cfg.area_y_min) / self._size[1]
        obs[2] = 1.0 if cfg.uav_altitude == 0 else u.position[2] / cfg.uav_altitude
        obs[3] = _ratio(u.score, n_veh)
        obs[4] = u.step_energy / self.energy_scale
        obs[5] = _ratio(u.score, u.best_score)
        obs[6] = (u.best_position[0] - cfg.area_x_min) / self._size[0]
        obs[7] = (u.best_position[1] - cfg.area_y_min) / self._size[1]
        obs[8] = _ratio(u.neighbourhood_score, u.best_neighbourhood_score)
        reports = self._reports.get(j, [])
        diag = cfg.diagonal
        for k in range(self.K):
            base = 9 + 3 * k
            if k < len(reports):
                r = reports[k]
                obs[base] = r.distance / diag
                obs[base + 1] = _ratio(r.score, n_veh)
                obs[base + 2] = r.step_energy / self.energy_scale
            else:
                obs[base] = 1.0
        return np.clip(obs, 0.0, 1.0)

    def neighbour_reports(self, j: int) -> list[NeighborReport]:
        return list(self._reports.get(j, []))
