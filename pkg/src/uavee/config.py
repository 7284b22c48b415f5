"""Simulation configuration, unit conversions and seeding.

Configuration files are YAML documents (format version 1). Every key is
optional; anything left out falls back to the defaults below. The layout:

    version: 1
    seed: 0
    episodes: 250
    max_steps: 1500
    area: {x_min: 0, x_max: 3000, y_min: 0, y_max: 3000}
    uav:
      n_uavs: 10
      altitude: 120
      step_size: 20            # metres per move action
      step_duration: 1         # seconds per time-step
      initial_positions: null  # [[x, y], ...]; null = evenly spaced grid
    channel:
      beta: 1.4248e-4          # linear attenuation factor
      pathloss_exponent: 2
      tx_power_dbm: 20
      noise_dbm: -130
      sinr_threshold_db: 5
      bandwidth: 1.0e6
      interference_range: null # metres; null = every other UAV interferes
    energy: {kappa0: 79.85, kappa1: 88.63, kappa2: 0.018, tip_speed: 120,
             mean_hover_velocity: 4.03, battery_capacity: 1278720,
             power_model_sign: paper}
    learning: {learning_rate: 1.0e-4, discount: 0.95, replay_capacity: 10000,
               batch_size: 1024, target_sync_period: 1000, epsilon_start: 1.0,
               epsilon_end: 0.05, epsilon_decay_episodes: 200,
               comm_range: 1000, n_neighbors: 6, rmsprop_decay: 0.99,
               rmsprop_eps: 1.0e-8}
    scenario: {kind: static_clusters, n_vehicles: 300, clusters: [...]}
    output: {trajectory_episodes: [10, -1], checkpoint_every: 1}
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

CONFIG_VERSION = 1
SEED_ENV_VAR = "UAVEE_SEED"
MAX_STEP_SIZE = 20.0


class ConfigError(ValueError):
    """Raised for unparseable documents or values that break an invariant."""


def db_to_linear(x: float) -> float:
    return 10.0 ** (x / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(x: float) -> float:
    return 10.0 ** (x / 10.0) / 1000.0


def watts_to_dbm(x: float) -> float:
    return 10.0 * math.log10(x * 1000.0)


def free_space_gain(carrier_hz: float) -> float:
    """Reference gain (wavelength / 4 pi)^2 at one metre."""
    wavelength = 299_792_458.0 / carrier_hz
    return (wavelength / (4.0 * math.pi)) ** 2


@dataclass(frozen=True)
class ChannelParams:
    beta: float = free_space_gain(2.0e9)
    pathloss_exponent: float = 2.0
    tx_power: float = dbm_to_watts(20.0)
    noise: float = dbm_to_watts(-130.0)
    sinr_threshold: float = db_to_linear(5.0)
    bandwidth: float = 1.0e6
    interference_range: float | None = None

    def validate(self) -> None:
        for name in ("beta", "tx_power", "noise", "sinr_threshold", "bandwidth"):
            _require(getattr(self, name) > 0, f"channel.{name}", "must be > 0")
        _require(self.pathloss_exponent >= 1, "channel.pathloss_exponent", "must be >= 1")
        if self.interference_range is not None:
            _require(self.interference_range >= 0, "channel.interference_range", "must be >= 0")


@dataclass(frozen=True)
class EnergyParams:
    kappa0: float = 79.85
    kappa1: float = 88.63
    kappa2: float = 0.018
    tip_speed: float = 120.0
    mean_hover_velocity: float = 4.03
    # 16 Ah pack at an assumed 22.2 V (6S LiPo)
    battery_capacity: float = 16.0 * 22.2 * 3600.0
    power_model_sign: str = "paper"

    def validate(self) -> None:
        for name in ("kappa0", "kappa1", "kappa2", "tip_speed", "mean_hover_velocity",
                     "battery_capacity"):
            _require(getattr(self, name) > 0, f"energy.{name}", "must be > 0")
        _require(self.power_model_sign in ("paper", "corrected"), "energy.power_model_sign",
                 "must be 'paper' or 'corrected'")


@dataclass(frozen=True)
class LearningParams:
    learning_rate: float = 1e-4
    discount: float = 0.95
    replay_capacity: int = 10_000
    batch_size: int = 1024
    target_sync_period: int = 1000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 200
    comm_range: float = 1000.0
    n_neighbors: int = 6
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-8

    def validate(self) -> None:
        _require(self.learning_rate > 0, "learning.learning_rate", "must be > 0")
        _require(0 <= self.discount < 1, "learning.discount", "must be in [0, 1)")
        _require(self.replay_capacity >= 1, "learning.replay_capacity", "must be >= 1")
        _require(1 <= self.batch_size <= self.replay_capacity, "learning.batch_size",
                 "must be in [1, replay_capacity]")
        _require(self.target_sync_period >= 1, "learning.target_sync_period", "must be >= 1")
        for name in ("epsilon_start", "epsilon_end"):
            _require(0 <= getattr(self, name) <= 1, f"learning.{name}", "must be in [0, 1]")
        _require(self.epsilon_decay_episodes >= 0, "learning.epsilon_decay_episodes", "must be >= 0")
        _require(self.comm_range >= 0, "learning.comm_range", "must be >= 0")
        _require(self.n_neighbors >= 0, "learning.n_neighbors", "must be >= 0")
        _require(0 <= self.rmsprop_decay < 1, "learning.rmsprop_decay", "must be in [0, 1)")
        _require(self.rmsprop_eps > 0, "learning.rmsprop_eps", "must be > 0")


@dataclass(frozen=True)
class ClusterSpec:
    centre: tuple[float, float]
    radius: float
    weight: float


@dataclass(frozen=True)
class ScenarioSpec:
    """Ground-user layout.

    ``static_clusters`` uses ``clusters``; ``cross_roads`` uses ``road_width``
    and ``crossing`` (defaults to the area centre); ``edge_concentration``
    uses ``band_width`` along the x_max edge; ``trace`` reads ``trace_path``.
    """

    kind: str = "static_clusters"
    n_vehicles: int = 300
    clusters: tuple[ClusterSpec, ...] = (
        ClusterSpec((600.0, 2400.0), 300.0, 0.5),
        ClusterSpec((2300.0, 2200.0), 250.0, 0.3),
        ClusterSpec((1500.0, 700.0), 400.0, 0.2),
    )
    road_width: float = 60.0
    crossing: tuple[float, float] | None = None
    band_width: float = 200.0
    trace_path: str | None = None

    @property
    def mobility(self) -> str:
        return "trace" if self.kind == "trace" else "static"


@dataclass(frozen=True)
class OutputParams:
    # negative indices count from the last episode
    trajectory_episodes: tuple[int, ...] = (-1,)
    checkpoint_every: int = 1


@dataclass(frozen=True)
class WorldConfig:
    area_x_min: float = 0.0
    area_x_max: float = 3000.0
    area_y_min: float = 0.0
    area_y_max: float = 3000.0
    uav_altitude: float = 120.0
    n_uavs: int = 10
    step_duration: float = 1.0
    uav_step_size: float = 20.0
    initial_positions: tuple[tuple[float, float], ...] | None = None
    episodes: int = 250
    max_steps: int = 1500
    seed: int = 0
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    learning: LearningParams = field(default_factory=LearningParams)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    output: OutputParams = field(default_factory=OutputParams)

    @property
    def width(self) -> float:
        return self.area_x_max - self.area_x_min

    @property
    def height(self) -> float:
        return self.area_y_max - self.area_y_min

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def max_speed(self) -> float:
        return self.uav_step_size / self.step_duration

    def validate(self) -> None:
        _require(self.area_x_min < self.area_x_max, "area.x_max", "must exceed area.x_min")
        _require(self.area_y_min < self.area_y_max, "area.y_max", "must exceed area.y_min")
        _require(self.uav_altitude >= 0, "uav.altitude", "must be >= 0")
        _require(self.n_uavs >= 1, "uav.n_uavs", "must be >= 1")
        _require(self.step_duration > 0, "uav.step_duration", "must be > 0")
        _require(0 <= self.uav_step_size <= MAX_STEP_SIZE, "uav.step_size",
                 f"must be in [0, {MAX_STEP_SIZE:g}]")
        _require(self.episodes >= 1, "episodes", "must be >= 1")
        _require(self.max_steps >= 1, "max_steps", "must be >= 1")
        _require(self.seed >= 0, "seed", "must be a non-negative integer")
        if self.initial_positions is not None:
            _require(len(self.initial_positions) == self.n_uavs, "uav.initial_positions",
                     "needs one [x, y] per UAV")
            for x, y in self.initial_positions:
                _require(self.area_x_min <= x <= self.area_x_max
                         and self.area_y_min <= y <= self.area_y_max,
                         "uav.initial_positions", f"({x}, {y}) lies outside the area")
        self.channel.validate()
        self.energy.validate()
        self.learning.validate()
        self._validate_scenario()

    def _validate_scenario(self) -> None:
        sc = self.scenario
        _require(sc.kind in ("static_clusters", "cross_roads", "edge_concentration", "trace"),
                 "scenario.kind", f"unknown kind {sc.kind!r}")
        _require(sc.n_vehicles >= 0, "scenario.n_vehicles", "must be >= 0")
        if sc.kind == "static_clusters":
            _require(len(sc.clusters) >= 1, "scenario.clusters", "needs at least one cluster")
            _require(abs(sum(c.weight for c in sc.clusters) - 1.0) < 1e-9,
                     "scenario.clusters", "weights must sum to 1")
            for c in sc.clusters:
                _require(c.radius > 0 and c.weight >= 0, "scenario.clusters",
                         "radius must be > 0 and weight >= 0")
                _require(self.area_x_min <= c.centre[0] <= self.area_x_max
                         and self.area_y_min <= c.centre[1] <= self.area_y_max,
                         "scenario.clusters", f"centre {c.centre} lies outside the area")
        elif sc.kind == "cross_roads":
            _require(sc.road_width > 0, "scenario.road_width", "must be > 0")
        elif sc.kind == "edge_concentration":
            _require(0 < sc.band_width <= self.width, "scenario.band_width",
                     "must be in (0, area width]")
        else:
            _require(bool(sc.trace_path), "scenario.trace_path", "required for kind 'trace'")

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))

    def digest(self) -> str:
        """Stable hash of the effective configuration (seed excluded)."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _require(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConfigError(f"{key}: {message}")


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _take(section: Mapping[str, Any], key: str, path: str, kind: type, default: Any) -> Any:
    if key not in section or section[key] is None:
        return default
    value = section[key]
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {value!r}") from None
    raise TypeError(kind)


def _section(doc: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = doc.get(key) or {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{key}: expected a mapping, got {type(value).__name__}")
    return value


def _pairs(value: Any, path: str) -> tuple[tuple[float, float], ...]:
    try:
        out = tuple((float(p[0]), float(p[1])) for p in value)
        if any(len(p) != 2 for p in value):
            raise ValueError
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"{path}: expected a list of [x, y] pairs") from None
    return out


def config_from_dict(doc: Mapping[str, Any] | None) -> WorldConfig:
    doc = doc or {}
    if not isinstance(doc, Mapping):
        raise ConfigError("<root>: expected a mapping at the top level")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: unsupported config version {version!r}")

    d = WorldConfig()
    area = _section(doc, "area")
    uav = _section(doc, "uav")
    ch = _section(doc, "channel")
    en = _section(doc, "energy")
    le = _section(doc, "learning")
    sc = _section(doc, "scenario")
    out = _section(doc, "output")

    dc = ChannelParams()
    channel = ChannelParams(
        beta=_take(ch, "beta", "channel", float, dc.beta),
        pathloss_exponent=_take(ch, "pathloss_exponent", "channel", float, dc.pathloss_exponent),
        tx_power=dbm_to_watts(_take(ch, "tx_power_dbm", "channel", float, 20.0)),
        noise=dbm_to_watts(_take(ch, "noise_dbm", "channel", float, -130.0)),
        sinr_threshold=db_to_linear(_take(ch, "sinr_threshold_db", "channel", float, 5.0)),
        bandwidth=_take(ch, "bandwidth", "channel", float, dc.bandwidth),
        interference_range=_take(ch, "interference_range", "channel", float, None),
    )

    de = EnergyParams()
    energy = EnergyParams(**{
        f.name: _take(en, f.name, "energy", str if f.name == "power_model_sign" else float,
                      getattr(de, f.name))
        for f in fields(EnergyParams)
    })

    dl = LearningParams()
    learning = LearningParams(**{
        f.name: _take(le, f.name, "learning", type(getattr(dl, f.name)), getattr(dl, f.name))
        for f in fields(LearningParams)
    })

    ds = ScenarioSpec()
    clusters = ds.clusters
    if "clusters" in sc and sc["clusters"] is not None:
        try:
            clusters = tuple(
                ClusterSpec((float(c["centre"][0]), float(c["centre"][1])),
                            float(c["radius"]), float(c.get("weight", 1.0)))
                for c in sc["clusters"]
            )
        except (KeyError, TypeError, ValueError, IndexError):
            raise ConfigError("scenario.clusters: each cluster needs centre [x, y], radius, weight") from None
    crossing = sc.get("crossing")
    scenario = ScenarioSpec(
        kind=_take(sc, "kind", "scenario", str, ds.kind),
        n_vehicles=_take(sc, "n_vehicles", "scenario", int, ds.n_vehicles),
        clusters=clusters,
        road_width=_take(sc, "road_width", "scenario", float, ds.road_width),
        crossing=None if crossing is None else _pairs([crossing], "scenario.crossing")[0],
        band_width=_take(sc, "band_width", "scenario", float, ds.band_width),
        trace_path=_take(sc, "trace_path", "scenario", str, None),
    )

    traj = out.get("trajectory_episodes", list(OutputParams().trajectory_episodes))
    try:
        traj = tuple(int(e) for e in (traj or ()))
    except (TypeError, ValueError):
        raise ConfigError("output.trajectory_episodes: expected a list of integers") from None
    output = OutputParams(
        trajectory_episodes=traj,
        checkpoint_every=_take(out, "checkpoint_every", "output", int, 1),
    )

    init = uav.get("initial_positions")
    cfg = WorldConfig(
        area_x_min=_take(area, "x_min", "area", float, d.area_x_min),
        area_x_max=_take(area, "x_max", "area", float, d.area_x_max),
        area_y_min=_take(area, "y_min", "area", float, d.area_y_min),
        area_y_max=_take(area, "y_max", "area", float, d.area_y_max),
        uav_altitude=_take(uav, "altitude", "uav", float, d.uav_altitude),
        n_uavs=_take(uav, "n_uavs", "uav", int, d.n_uavs),
        step_duration=_take(uav, "step_duration", "uav", float, d.step_duration),
        uav_step_size=_take(uav, "step_size", "uav", float, d.uav_step_size),
        initial_positions=None if init is None else _pairs(init, "uav.initial_positions"),
        episodes=_take(doc, "episodes", "<root>", int, d.episodes),
        max_steps=_take(doc, "max_steps", "<root>", int, d.max_steps),
        seed=_take(doc, "seed", "<root>", int, d.seed),
        channel=channel,
        energy=energy,
        learning=learning,
        scenario=scenario,
        output=output,
    )
    if cfg.output.checkpoint_every < 1:
        raise ConfigError("output.checkpoint_every: must be >= 1")
    cfg.validate()
    return cfg


def load_config(source: str) -> WorldConfig:
    """Parse a YAML document (text, not a path) into a validated config."""
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"<document>: YAML parse error: {exc}") from None
    return config_from_dict(doc)


def load_config_file(path: str | os.PathLike, *, env: Mapping[str, str] | None = None) -> WorldConfig:
    """Read a config file; ``UAVEE_SEED`` in the environment overrides the seed.

    A relative ``scenario.trace_path`` is resolved against the config file's
    directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    cfg = load_config(text)
    tp = cfg.scenario.trace_path
    if tp and not Path(tp).is_absolute():
        cfg = replace(cfg, scenario=replace(cfg.scenario, trace_path=str(path.parent / tp)))
    env = os.environ if env is None else env
    if env.get(SEED_ENV_VAR):
        try:
            seed = int(env[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR}: expected an integer, got {env[SEED_ENV_VAR]!r}") from None
        cfg = replace(cfg, seed=seed)
        cfg.validate()
    return cfg


def default_initial_positions(cfg: WorldConfig) -> np.ndarray:
    """Evenly spaced grid: UAVs at the cell centres of a near-square grid."""
    if cfg.initial_positions is not None:
        return np.array(cfg.initial_positions, dtype=np.float64)
    n = cfg.n_uavs
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    out = []
    for k in range(n):
        r, c = divmod(k, cols)
        out.append((cfg.area_x_min + (c + 0.5) * cfg.width / cols,
                    cfg.area_y_min + (r + 0.5) * cfg.height / rows))
    return np.array(out, dtype=np.float64)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, *stream)``."""
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))
