"""Episode loop, training, greedy evaluation and variant comparison.

Output layout for one (variant, seed) run under ``out``::

    <variant>/seed_<seed>/
        metrics.csv            per-episode metrics
        manifest.json          config digest, seed, variant, episodes
        trajectory_ep<N>.json  per-step trajectories for selected episodes
        checkpoints/agent_<j>.npz, checkpoints/memory.json
        resume.pkl             full learner state for interrupted runs
"""

from __future__ import annotations

import json
import logging
import pickle
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__, metrics, nn
from .agent import VARIANTS, AgentVariant, DDQNAgent, epsilon_schedule
from .config import WorldConfig, make_rng
from .environment import UavEnvironment
from .mobility import generate_scenario

log = logging.getLogger(__name__)

RESUME_VERSION = 1


class PlanError(ValueError):
    pass


@dataclass
class RunPlan:
    command: str
    config: WorldConfig
    out: Path
    seeds: list[int] = field(default_factory=lambda: [0])
    variants: list[str] = field(default_factory=lambda: ["dacemad"])
    checkpoint: Path | None = None
    episodes_override: int | None = None
    eval_episodes: int = 1

    def __post_init__(self):
        self.out = Path(self.out)
        if not self.seeds:
            raise PlanError("at least one seed is required")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise PlanError(f"variants must be a non-empty subset of {VARIANTS}, got {self.variants}")
        if self.episodes_override is not None:
            if self.episodes_override < 1:
                raise PlanError("--episodes-override must be >= 1")
            self.config = replace(self.config, episodes=self.episodes_override)
        if self.eval_episodes < 1:
            raise PlanError("eval episodes must be >= 1")


@dataclass
class RunResult:
    variant: str
    seed: int
    directory: Path
    episodes: list[metrics.EpisodeMetrics]
    agents: list[DDQNAgent] = field(repr=False, default_factory=list)
    truncated: bool = False


def run_dir(out: Path, variant: str, seed: int) -> Path:
    return Path(out) / variant / f"seed_{seed}"


def build(cfg: WorldConfig, seed: int, variant: AgentVariant):
    provider = generate_scenario(cfg, seed=seed)
    env = UavEnvironment(cfg, provider, cooperative=variant.cooperative)
    agents = [DDQNAgent(cfg.learning, make_rng(seed, 1, j), variant) for j in range(cfg.n_uavs)]
    return env, agents


def run_episode(env: UavEnvironment, agents: Sequence[DDQNAgent], epsilon: float,
                learn: bool, on_step: Callable | None = None) -> list[dict]:
    """One episode of observe -> act -> step -> store -> learn for every
    alive agent. Returns the step logs."""
    obs = env.reset()
    logs = []
    n = len(agents)
    while env.active:
        acting = env.alive_indices
        actions = [None] * n
        for j in acting:
            actions[j] = agents[j].act(obs[j], epsilon)
        nobs, rewards, dones, step_log = env.step(actions)
        if learn:
            for j in acting:
                agents[j].remember(obs[j], actions[j], rewards[j], nobs[j], step_log["died"][j])
                agents[j].learn_step()
        for j in acting:
            obs[j] = nobs[j]
        if on_step is not None:
            on_step(env, step_log)
        logs.append(step_log)
    return logs


def _memory(env: UavEnvironment) -> list[dict]:
    return [{"best_score": u.best_score, "best_position": u.best_position.tolist(),
             "best_neighbourhood_score": u.best_neighbourhood_score} for u in env.uavs]


def _restore_memory(env: UavEnvironment, memory: list[dict]) -> None:
    env.reset(keep_memory=False)
    for u, m in zip(env.uavs, memory):
        u.best_score = int(m["best_score"])
        u.best_position = np.array(m["best_position"], dtype=np.float64)
        u.best_neighbourhood_score = int(m["best_neighbourhood_score"])


def _manifest(cfg: WorldConfig, seed: int, variant: str, **extra) -> dict:
    return {"config_digest": cfg.digest(), "seed": seed, "variant": variant,
            "episodes": cfg.episodes, "max_steps": cfg.max_steps,
            "n_uavs": cfg.n_uavs, "package_version": __version__, **extra}


def _trajectory_episodes(cfg: WorldConfig) -> set[int]:
    out = set()
    for e in cfg.output.trajectory_episodes:
        k = e if e >= 0 else cfg.episodes + e
        if 0 <= k < cfg.episodes:
            out.add(k)
    return out


def save_checkpoints(directory: Path, agents: Sequence[DDQNAgent], env: UavEnvironment) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for j, agent in enumerate(agents):
        if agent.online is not None:
            nn.save_params(directory / f"agent_{j}.npz", agent.online)
    metrics.write_json(directory / "memory.json", _memory(env))


def load_checkpoints(directory: Path, agents: Sequence[DDQNAgent], env: UavEnvironment) -> None:
    directory = Path(directory)
    for j, agent in enumerate(agents):
        if not agent.variant.learns:
            continue
        path = directory / f"agent_{j}.npz"
        if not path.exists():
            raise FileNotFoundError(f"missing checkpoint for agent {j}: {path}")
        agent.load_online(nn.load_params(path))
    mem = directory / "memory.json"
    if mem.exists():
        _restore_memory(env, json.loads(mem.read_text()))


def _check_writable(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        probe = directory / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PlanError(f"output directory {directory} is not writable ({exc.strerror})") from None


def train_run(cfg: WorldConfig, seed: int, variant_kind: str, out: Path,
              resume: bool = True, stop_after: int | None = None) -> RunResult:
    """Train one (variant, seed) pair for ``cfg.episodes`` episodes.

    With ``resume`` an existing ``resume.pkl`` from the same config, seed and
    variant is picked up and training continues after its last episode.
    ``stop_after`` ends the run early after that many total episodes (used to
    simulate interruptions).
    """
    variant = AgentVariant(variant_kind)
    directory = run_dir(out, variant_kind, seed)
    _check_writable(directory)
    env, agents = build(cfg, seed, variant)
    rows: list[metrics.EpisodeMetrics] = []
    start = 0
    state_path = directory / "resume.pkl"
    if resume and state_path.exists():
        with state_path.open("rb") as fh:
            state = pickle.load(fh)
        same = (state.get("version") == RESUME_VERSION and state["digest"] == cfg.digest()
                and state["seed"] == seed and state["variant"] == variant_kind)
        if same:
            agents = state["agents"]
            rows = state["rows"]
            start = state["next_episode"]
            _restore_memory(env, state["memory"])
            log.info("resuming %s seed %d at episode %d", variant_kind, seed, start)
        else:
            log.info("ignoring stale resume state in %s", directory)

    traj_eps = _trajectory_episodes(cfg)
    end = cfg.episodes if stop_after is None else min(cfg.episodes, stop_after)
    for ep in range(start, end):
        eps = epsilon_schedule(ep, cfg.learning)
        t0 = time.perf_counter()
        vehicles = []
        hook = None
        if ep in traj_eps:
            def hook(e, _log, _v=vehicles):
                _v.append([[vid, float(p[0]), float(p[1])]
                           for vid, p in zip(e.snapshot.ids, e.snapshot.positions)])
            initial = {"positions": env.initial_positions.tolist()}
        logs = run_episode(env, agents, eps, learn=variant.learns, on_step=hook)
        m = metrics.episode_metrics(ep, logs, wall_time=time.perf_counter() - t0)
        rows.append(m)
        if ep in traj_eps:
            metrics.write_json(directory / f"trajectory_ep{ep}.json",
                               metrics.trajectory_record(ep, cfg.step_duration, initial, logs, vehicles))
        if env.truncated and ep == start:
            log.info("vehicle provider shorter than max_steps: episodes truncated at %d steps",
                     env.episode_length)
        log.debug("%s seed %d ep %d eps %.3f cdr %.3f ee %.1f", variant_kind, seed, ep, eps, m.cdr, m.ee)
        last = ep == end - 1
        if last or (ep + 1) % cfg.output.checkpoint_every == 0:
            save_checkpoints(directory / "checkpoints", agents, env)
            metrics.write_episode_csv(directory / "metrics.csv", rows)
            with state_path.open("wb") as fh:
                pickle.dump({"version": RESUME_VERSION, "digest": cfg.digest(), "seed": seed,
                             "variant": variant_kind, "next_episode": ep + 1, "agents": agents,
                             "rows": rows, "memory": _memory(env)}, fh)
    if start >= end:
        metrics.write_episode_csv(directory / "metrics.csv", rows)
    metrics.write_json(directory / "manifest.json",
                       _manifest(cfg, seed, variant_kind, completed_episodes=len(rows),
                                 episode_length=env.episode_length))
    return RunResult(variant_kind, seed, directory, rows, agents, env.truncated)


def evaluate_run(cfg: WorldConfig, seed: int, variant_kind: str,
                 checkpoint_dir: Path | None, episodes: int = 1,
                 agents: Sequence[DDQNAgent] | None = None) -> list[metrics.EpisodeMetrics]:
    """Greedy (epsilon = 0) episodes without learning."""
    variant = AgentVariant(variant_kind)
    env, fresh = build(cfg, seed, variant)
    if agents is None:
        agents = fresh
        if variant.learns:
            if checkpoint_dir is None:
                raise PlanError(f"variant {variant_kind!r} needs --checkpoint for evaluation")
            load_checkpoints(Path(checkpoint_dir), agents, env)
    elif checkpoint_dir is not None:
        mem = Path(checkpoint_dir) / "memory.json"
        if mem.exists():
            _restore_memory(env, json.loads(mem.read_text()))
    rows = []
    for ep in range(episodes):
        rows.append(metrics.episode_metrics(ep, run_episode(env, agents, 0.0, learn=False)))
    return rows


def train(plan: RunPlan) -> list[RunResult]:
    _check_writable(plan.out)
    results = []
    for variant in plan.variants:
        for seed in plan.seeds:
            results.append(train_run(replace(plan.config, seed=seed), seed, variant, plan.out))
    return results


def evaluate(plan: RunPlan) -> dict[tuple[str, int], list[metrics.EpisodeMetrics]]:
    _check_writable(plan.out)
    out = {}
    for variant in plan.variants:
        for seed in plan.seeds:
            ckpt = None
            if AgentVariant(variant).learns:
                base = plan.checkpoint or (run_dir(plan.out, variant, seed) / "checkpoints")
                ckpt = Path(base)
                if (ckpt / variant / f"seed_{seed}" / "checkpoints").is_dir():
                    ckpt = ckpt / variant / f"seed_{seed}" / "checkpoints"
            rows = evaluate_run(replace(plan.config, seed=seed), seed, variant, ckpt, plan.eval_episodes)
            directory = run_dir(plan.out, variant, seed)
            directory.mkdir(parents=True, exist_ok=True)
            metrics.write_episode_csv(directory / "eval_metrics.csv", rows)
            out[(variant, seed)] = rows
    return out


def comparison_table(results: dict[str, list[metrics.EpisodeMetrics]],
                     reference: str = "dacemad") -> list[dict]:
    """Mean and std over runs of CDR, normalised EE and energy (kJ)."""
    if reference not in results:
        reference = next(iter(results))
    ee = metrics.normalise_ee({v: [m.ee for m in ms] for v, ms in results.items()}, reference)
    table = []
    for v, ms in results.items():
        cm, cs = metrics.mean_std([m.cdr for m in ms])
        em, es = metrics.mean_std(ee[v])
        km, ks = metrics.mean_std([m.total_energy_kj for m in ms])
        table.append({"variant": v, "cdr_mean": cm, "cdr_std": cs, "ee_norm_mean": em,
                      "ee_norm_std": es, "energy_kj_mean": km, "energy_kj_std": ks})
    return table


def compare(plan: RunPlan) -> list[dict]:
    if len(plan.variants) < 2:
        raise PlanError("compare needs at least two variants")
    _check_writable(plan.out)
    per_variant: dict[str, list[metrics.EpisodeMetrics]] = {}
    for variant in plan.variants:
        runs = []
        for seed in plan.seeds:
            cfg = replace(plan.config, seed=seed)
            if AgentVariant(variant).learns:
                res = train_run(cfg, seed, variant, plan.out)
                rows = evaluate_run(cfg, seed, variant, res.directory / "checkpoints",
                                    plan.eval_episodes, agents=res.agents)
            else:
                rows = evaluate_run(cfg, seed, variant, None, plan.eval_episodes)
            runs.append(_mean_episode(rows))
        per_variant[variant] = runs
    table = comparison_table(per_variant)
    metrics.write_comparison_csv(plan.out / "comparison.csv", table)
    return table


def _mean_episode(rows: list[metrics.EpisodeMetrics]) -> metrics.EpisodeMetrics:
    if len(rows) == 1:
        return rows[0]
    k = len(rows)
    return metrics.EpisodeMetrics(
        episode=-1, cdr=sum(r.cdr for r in rows) / k,
        total_throughput=sum(r.total_throughput for r in rows) / k,
        total_energy=sum(r.total_energy for r in rows) / k,
        ee=sum(r.ee for r in rows) / k, message_total=sum(r.message_total for r in rows) // k,
        steps=rows[0].steps)
