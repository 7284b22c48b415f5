import json
from dataclasses import replace

import pytest

from uavee import cli, harness, metrics
from uavee.config import load_config_file

TINY = """\
version: 1
seed: 3
episodes: 1
max_steps: 10
area: {x_min: 0, x_max: 500, y_min: 0, y_max: 500}
uav: {n_uavs: 2}
learning: {batch_size: 8, replay_capacity: 200, target_sync_period: 5, epsilon_decay_episodes: 2}
scenario:
  kind: static_clusters
  n_vehicles: 10
  clusters:
    - {centre: [120, 380], radius: 60, weight: 0.6}
    - {centre: [380, 120], radius: 60, weight: 0.4}
output: {trajectory_episodes: [-1], checkpoint_every: 1}
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY)
    return p


@pytest.fixture
def cfg(cfg_path):
    return load_config_file(cfg_path, env={})


def test_train_single_episode_artifacts(cfg, tmp_path):
    res = harness.train_run(cfg, 3, "dacemad", tmp_path / "out")
    d = res.directory
    assert len(metrics.read_episode_csv(d / "metrics.csv")) == 1
    assert sorted(p.name for p in (d / "checkpoints").glob("agent_*.npz")) == ["agent_0.npz", "agent_1.npz"]
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["variant"] == "dacemad"
    assert manifest["config_digest"] == cfg.digest()
    assert (d / "trajectory_ep0.json").exists()


def test_train_is_deterministic(cfg, tmp_path):
    cfg = replace(cfg, episodes=3)
    a = harness.train_run(cfg, 3, "dacemad", tmp_path / "a").directory
    b = harness.train_run(cfg, 3, "dacemad", tmp_path / "b").directory
    for name in ("metrics.csv", "trajectory_ep2.json", "checkpoints/agent_1.npz"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_resume_matches_uninterrupted_run(cfg, tmp_path):
    cfg = replace(cfg, episodes=4)
    full = harness.train_run(cfg, 3, "dacemad", tmp_path / "full").directory
    harness.train_run(cfg, 3, "dacemad", tmp_path / "cut", stop_after=2)
    cut = harness.run_dir(tmp_path / "cut", "dacemad", 3)
    assert len(metrics.read_episode_csv(cut / "metrics.csv")) == 2
    resumed = harness.train_run(cfg, 3, "dacemad", tmp_path / "cut")
    assert [m.episode for m in resumed.episodes] == [0, 1, 2, 3]
    assert (full / "metrics.csv").read_bytes() == (cut / "metrics.csv").read_bytes()


def test_trace_shorter_than_max_steps_truncates(cfg, tmp_path, caplog):
    trace = tmp_path / "trace.csv"
    rows = ["t,vehicle_id,x,y,speed"] + [f"{t},v{k},{100 + 10 * k + t},{200},1" for t in range(5) for k in range(3)]
    trace.write_text("\n".join(rows) + "\n")
    short = replace(cfg, scenario=replace(cfg.scenario, kind="trace", trace_path=str(trace)))
    with caplog.at_level("INFO", logger="uavee.harness"):
        res = harness.train_run(short, 0, "dacemad", tmp_path / "out")
    assert res.truncated and res.episodes[0].steps == 4
    assert "truncated" in caplog.text


def test_random_eval_needs_no_checkpoint(cfg):
    rows = harness.evaluate_run(cfg, 3, "random", None, episodes=2)
    assert len(rows) == 2 and all(r.steps == 10 for r in rows)


def test_missing_checkpoint_names_agent(cfg, tmp_path):
    (tmp_path / "ck").mkdir()
    with pytest.raises(FileNotFoundError, match="agent 0"):
        harness.evaluate_run(cfg, 3, "dacemad", tmp_path / "ck")


def test_greedy_eval_is_repeatable(cfg, tmp_path):
    res = harness.train_run(replace(cfg, episodes=2), 3, "dacemad", tmp_path / "out")
    ck = res.directory / "checkpoints"
    a = harness.evaluate_run(cfg, 3, "dacemad", ck, 2)
    b = harness.evaluate_run(cfg, 3, "dacemad", ck, 2)
    assert [(m.cdr, m.ee, m.total_energy) for m in a] == [(m.cdr, m.ee, m.total_energy) for m in b]


def test_compare_table(cfg, tmp_path):
    plan = harness.RunPlan("compare", cfg, tmp_path / "out", seeds=[0, 1], variants=["dacemad", "random"])
    table = harness.compare(plan)
    assert [r["variant"] for r in table] == ["dacemad", "random"]
    assert set(table[0]) == set(metrics.COMPARISON_HEADER)
    assert table[0]["ee_norm_mean"] == pytest.approx(1.0)
    header = (tmp_path / "out" / "comparison.csv").read_text().splitlines()[0]
    assert header == "variant,cdr_mean,cdr_std,ee_norm_mean,ee_norm_std,energy_kj_mean,energy_kj_std"


def test_compare_variants_see_same_vehicles(cfg, tmp_path):
    a, _ = harness.build(cfg, 5, harness.AgentVariant("dacemad"))
    b, _ = harness.build(cfg, 5, harness.AgentVariant("mad"))
    assert a.provider.snapshot(0).positions.tobytes() == b.provider.snapshot(0).positions.tobytes()


@pytest.mark.parametrize("kw", [dict(seeds=[]), dict(variants=["maddpg"]), dict(variants=[]),
                                dict(episodes_override=0), dict(eval_episodes=0)])
def test_plan_validation(cfg, tmp_path, kw):
    with pytest.raises(harness.PlanError):
        harness.RunPlan("train", cfg, tmp_path, **kw)


def test_compare_needs_two_variants(cfg, tmp_path):
    with pytest.raises(harness.PlanError):
        harness.compare(harness.RunPlan("compare", cfg, tmp_path, variants=["dacemad"]))


def test_unwritable_output_fails_before_training(cfg, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(harness.PlanError):
        harness.train(harness.RunPlan("train", cfg, blocker / "sub"))


# -- CLI -----------------------------------------------------------------

def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


def test_cli_train_and_eval(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(out), "--seeds", "1,2"]) == 0
    assert (out / "dacemad" / "seed_2" / "metrics.csv").exists()
    assert cli.main(["eval", "--config", str(cfg_path), "--out", str(out), "--seeds", "1",
                     "--checkpoint", str(out)]) == 0
    assert (out / "dacemad" / "seed_1" / "eval_metrics.csv").exists()
    assert "dacemad seed 1" in capsys.readouterr().out


def test_cli_episodes_override(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(out), "--episodes-override", "2"]) == 0
    assert len(metrics.read_episode_csv(out / "dacemad" / "seed_3" / "metrics.csv")) == 2


def test_cli_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\nepisodes: 0\n")
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = error_line(capsys)
    assert err["error"] == "config" and "episodes" in err["message"]


def test_cli_bad_variant_exit_code(cfg_path, tmp_path, capsys):
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(tmp_path), "--variant", "maddpg"]) == 2
    assert error_line(capsys)["error"] == "config"


def test_cli_missing_checkpoint(cfg_path, tmp_path, capsys):
    code = cli.main(["eval", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
                     "--checkpoint", str(tmp_path / "nowhere")])
    assert code == 1
    err = error_line(capsys)
    assert err["error"] == "FileNotFoundError" and "agent 0" in err["message"]


def test_cli_gen_scenario(cfg_path, tmp_path):
    assert cli.main(["gen-scenario", "--config", str(cfg_path), "--out", str(tmp_path), "--steps", "3"]) == 0
    text = (tmp_path / "scenario_seed3.csv").read_text().splitlines()
    assert text[0] == "t,vehicle_id,x,y,speed" and len(text) == 1 + 3 * 10


def test_cli_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train"])
    assert exc.value.code != 0
