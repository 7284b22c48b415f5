"""Episode metrics (CDR, energy efficiency, energy, messages) and exports.

File layouts:

* ``metrics.csv`` -- header ``episode,cdr,ee,total_energy_kj,messages``,
  one row per episode, floats written with ``repr`` (round-trip exact).
* ``trajectory_ep{N}.json`` -- ``{"episode", "dt", "initial": {...},
  "steps": [...]}`` where each step holds ``t``, ``positions``, ``alive``,
  ``speeds``, ``energies``, ``scores``, ``throughput`` (bits per UAV),
  ``deployed``, ``connected``, ``messages`` and ``vehicles`` (``[[id, x, y],
  ...]``).
* ``manifest.json`` -- config digest, seed, variant, episode count, package
  version.
* ``comparison.csv`` -- header ``variant,cdr_mean,cdr_std,ee_norm_mean,
  ee_norm_std,energy_kj_mean,energy_kj_std``.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .energy import total_system_ee

EPISODE_CSV_HEADER = ("episode", "cdr", "ee", "total_energy_kj", "messages")
COMPARISON_HEADER = ("variant", "cdr_mean", "cdr_std", "ee_norm_mean", "ee_norm_std",
                     "energy_kj_mean", "energy_kj_std")


@dataclass
class EpisodeMetrics:
    episode: int
    cdr: float
    total_throughput: float
    total_energy: float
    ee: float
    message_total: int
    steps: int
    cdr_defined: bool = True
    agent_energy: list[float] = field(default_factory=list)
    agent_scores: list[list[int]] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def total_energy_kj(self) -> float:
        return self.total_energy / 1000.0


def cdr(logs: Sequence[Mapping]) -> tuple[float, bool]:
    """Mean per-step connected/deployed ratio; steps without vehicles are
    skipped. Returns ``(value, defined)``; ``(0.0, False)`` if every step was
    empty."""
    ratios = [log["connected"] / log["deployed"] for log in logs if log["deployed"] > 0]
    if not ratios:
        return 0.0, False
    return sum(ratios) / len(ratios), True


def total_throughput(logs: Iterable[Mapping]) -> float:
    total = 0.0
    for log in logs:
        for bits in log["throughput"]:
            total += bits
    return total


def total_energy(logs: Iterable[Mapping]) -> float:
    total = 0.0
    for log in logs:
        for e in log["energies"]:
            total += e
    return total


def episode_metrics(episode: int, logs: Sequence[Mapping], wall_time: float = 0.0) -> EpisodeMetrics:
    value, defined = cdr(logs)
    bits = total_throughput(logs)
    joules = total_energy(logs)
    n = len(logs[0]["energies"]) if logs else 0
    per_agent = [0.0] * n
    for log in logs:
        for j, e in enumerate(log["energies"]):
            per_agent[j] += e
    return EpisodeMetrics(
        episode=episode,
        cdr=value,
        total_throughput=bits,
        total_energy=joules,
        ee=total_system_ee(bits, joules) if joules > 0 else 0.0,
        message_total=sum(log["messages"] for log in logs),
        steps=len(logs),
        cdr_defined=defined,
        agent_energy=per_agent,
        agent_scores=[[log["scores"][j] for log in logs] for j in range(n)],
        wall_time=wall_time,
    )


def normalise_ee(groups: Mapping[str, Sequence[float]], reference: str) -> dict[str, list[float]]:
    ref = groups.get(reference)
    if not ref:
        raise ValueError(f"reference group {reference!r} is empty or missing")
    mean = sum(ref) / len(ref)
    if mean == 0:
        raise ValueError(f"reference group {reference!r} has zero mean EE")
    return {name: [v / mean for v in values] for name, values in groups.items()}


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    m = statistics.fmean(values)
    s = statistics.pstdev(values) if len(values) > 1 else 0.0
    return m, s


# -- export --------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_episode_csv(path, rows: Sequence[EpisodeMetrics]) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EPISODE_CSV_HEADER)
            for m in rows:
                w.writerow([m.episode, _fmt(m.cdr), _fmt(m.ee), _fmt(m.total_energy_kj), m.message_total])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    return path


def read_episode_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if tuple(r.fieldnames or ()) != EPISODE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {r.fieldnames}")
        return [{"episode": int(row["episode"]), "cdr": float(row["cdr"]), "ee": float(row["ee"]),
                 "total_energy_kj": float(row["total_energy_kj"]), "messages": int(row["messages"])}
                for row in r]


def write_json(path, obj) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    return path


def trajectory_record(episode: int, dt: float, initial: Mapping, logs: Sequence[Mapping],
                      vehicles: Sequence) -> dict:
    keep = ("t", "positions", "alive", "speeds", "energies", "scores", "throughput",
            "deployed", "connected", "messages")
    steps = []
    for log, veh in zip(logs, vehicles):
        step = {k: log[k] for k in keep}
        step["vehicles"] = veh
        steps.append(step)
    return {"episode": episode, "dt": dt, "initial": dict(initial), "steps": steps}


def ee_from_trajectory(record: Mapping) -> float:
    steps = record["steps"]
    return total_system_ee(total_throughput(steps), total_energy(steps))


def write_comparison_csv(path, rows: Sequence[Mapping]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_HEADER)
        for row in rows:
            w.writerow([row["variant"]] + [_fmt(row[k]) for k in COMPARISON_HEADER[1:]])
    return path
