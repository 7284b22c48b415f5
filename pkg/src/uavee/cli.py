"""Command-line entry point: ``uavee {train,eval,compare,gen-scenario}``.

On failure a single JSON line ``{"error": <kind>, "message": <text>}`` is
written to stderr and the exit code is non-zero (2 for usage/config
problems, 1 for runtime failures).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, metrics
from .config import SEED_ENV_VAR, ConfigError, WorldConfig, load_config_file
from .mobility import TraceError, generate_scenario, write_trace


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("seeds must be non-negative integers")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavee", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, variants_default="dacemad"):
        sp.add_argument("--config", type=Path, help="YAML config file (defaults apply when omitted)")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--seeds", type=_seeds, default=None,
                        help="comma-separated seeds (default: config seed / UAVEE_SEED)")
        sp.add_argument("--variant", default=variants_default,
                        help="comma-separated subset of dacemad,cmad,mad,random")
        sp.add_argument("--episodes-override", type=int, default=None)
        sp.add_argument("--checkpoint", type=Path, default=None,
                        help="checkpoint directory (eval)")
        sp.add_argument("--eval-episodes", type=int, default=1)

    common(sub.add_parser("train", help="train agents and export metrics/checkpoints"))
    common(sub.add_parser("eval", help="greedy evaluation of trained checkpoints"))
    common(sub.add_parser("compare", help="train and evaluate several variants"),
           variants_default="dacemad,cmad,mad,random")
    gs = sub.add_parser("gen-scenario", help="write the configured vehicle layout as a trace CSV")
    gs.add_argument("--config", type=Path)
    gs.add_argument("--out", type=Path, required=True)
    gs.add_argument("--seeds", type=_seeds, default=None)
    gs.add_argument("--steps", type=int, default=1, help="number of snapshots to write")
    return p


def _config(path: Path | None) -> WorldConfig:
    if path is None:
        cfg = WorldConfig()
        seed = os.environ.get(SEED_ENV_VAR)
        if seed:
            try:
                cfg = replace(cfg, seed=int(seed))
            except ValueError:
                raise ConfigError(f"{SEED_ENV_VAR}: expected an integer, got {seed!r}") from None
        cfg.validate()
        return cfg
    return load_config_file(path)


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _print_rows(title: str, rows) -> None:
    print(title)
    for m in rows:
        print(f"  episode {m.episode:4d}  cdr {m.cdr:.4f}  ee {m.ee:12.2f} bit/J  "
              f"energy {m.total_energy_kj:10.3f} kJ  messages {m.message_total}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args.config)
        seeds = args.seeds or [cfg.seed]
        if args.command == "gen-scenario":
            args.out.mkdir(parents=True, exist_ok=True)
            for seed in seeds:
                provider = generate_scenario(cfg, seed=seed)
                n = args.steps if provider.length is None else min(args.steps, provider.length)
                path = args.out / f"scenario_seed{seed}.csv"
                write_trace(path, [provider.snapshot(t) for t in range(n)])
                print(path)
            return 0
        plan = harness.RunPlan(
            command=args.command, config=cfg, out=args.out, seeds=seeds,
            variants=[v.strip() for v in args.variant.split(",") if v.strip()],
            checkpoint=args.checkpoint, episodes_override=args.episodes_override,
            eval_episodes=args.eval_episodes)
        if args.command == "train":
            for res in harness.train(plan):
                last = res.episodes[-1]
                print(f"{res.variant} seed {res.seed}: {len(res.episodes)} episodes -> {res.directory} "
                      f"(last cdr {last.cdr:.4f}, ee {last.ee:.2f} bit/J)")
        elif args.command == "eval":
            for (variant, seed), rows in harness.evaluate(plan).items():
                _print_rows(f"{variant} seed {seed}", rows)
        else:
            table = harness.compare(plan)
            print(",".join(metrics.COMPARISON_HEADER))
            for row in table:
                print(",".join([row["variant"]] + [f"{row[k]:.6g}" for k in metrics.COMPARISON_HEADER[1:]]))
        return 0
    except (ConfigError, harness.PlanError) as exc:
        return _fail("config", str(exc), 2)
    except (TraceError, FileNotFoundError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except OSError as exc:
        return _fail("io", str(exc), 1)


if __name__ == "__main__":
    raise SystemExit(main())
