import json

import numpy as np
import pytest

from reftraj import data_path
from reftraj.cli import main
from reftraj.planner import load_path_csv


@pytest.fixture
def empty_world_file(tmp_path):
    w = json.loads(data_path("worlds", "toy-planar.json").read_text())
    w["obstacles"] = []
    p = tmp_path / "empty.json"
    p.write_text(json.dumps(w))
    return p


def test_plan_empty_world_two_vertices(tmp_path, empty_world_file):
    out = tmp_path / "p.csv"
    code = main(["plan", "--config", "toy-1", "--world", str(empty_world_file), "--output", str(out)])
    assert code == 0
    path = load_path_csv(out)
    assert path.shape == (2, 2)


def test_plan_seeded_twice_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["plan", "--config", "toy-2", "--seed", "3", "--output", str(a)]) == 0
    assert main(["plan", "--config", "toy-2", "--seed", "3", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_plan_bookshelf_replay_verified(tmp_path):
    from reftraj.arm import load_world, segment_collision_free

    out = tmp_path / "shelf.csv"
    assert main(["plan", "--config", "bookshelf-2-ML", "--output", str(out)]) == 0
    path = load_path_csv(out)
    world = load_world(str(data_path("worlds", "bookshelf.json")))
    # the CSV is rounded to 10 significant digits, so re-verify the rounded path itself
    assert all(segment_collision_free(world, a, b) for a, b in zip(path[:-1], path[1:]))


def test_plan_failure_exit_code(tmp_path):
    task = json.loads(data_path("tasks", "toy-1.json").read_text())
    task["world_file"] = str(data_path("worlds", "toy-planar.json"))
    task["rrt"] = {"max_iterations": 1, "goal_bias": 0.0, "sample_margin": None}
    p = tmp_path / "t.json"
    p.write_text(json.dumps(task))
    assert main(["plan", "--config", str(p), "--output", str(tmp_path / "x.csv")]) == 2


def test_bad_config_exit_code(tmp_path):
    assert main(["plan", "--config", str(tmp_path / "missing.json")]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["baseline", "--config", str(bad)]) == 4


def test_train_evaluate_baseline_compare(tmp_path):
    extra = tmp_path / "train.json"
    extra.write_text(json.dumps({"learning_starts": 200, "random_steps": 200, "eval_interval": 300,
                                 "eval_episodes": 1, "td3": {"hidden": [8], "batch_size": 16}}))
    run = tmp_path / "run"
    assert main(["train", "--config", "toy-3", "--budget", "600", "--train-config", str(extra),
                 "--out-dir", str(run), "--ablation", "no-ref"]) == 0
    for name in ("checkpoint.npz", "episodes.csv", "evals.csv", "learning_curve.svg"):
        assert (run / name).exists()
    assert main(["evaluate", "--config", "toy-3", "--checkpoint", str(run / "checkpoint.npz"),
                 "--out-dir", str(tmp_path / "ev")]) == 0
    assert (tmp_path / "ev" / "trajectory_0.csv").exists()
    assert main(["baseline", "--config", "toy-3", "--out-dir", str(tmp_path / "bl")]) == 0
    assert main(["compare", "--config", "toy-3", "--checkpoint", str(run / "checkpoint.npz"),
                 "--out-dir", str(tmp_path / "cmp")]) == 0
    assert (tmp_path / "cmp" / "compare.md").read_text().startswith("| Task")
    # resume continues from the stored step count
    assert main(["train", "--config", "toy-3", "--budget", "900", "--train-config", str(extra),
                 "--out-dir", str(run), "--resume", str(run / "checkpoint.npz")]) == 0


def test_evaluate_mismatched_checkpoint(tmp_path):
    from reftraj.agent import TD3Agent, TD3Config
    from reftraj.evaluate import save_agent

    save_agent(TD3Agent(12, 6, TD3Config(hidden=(4,))), tmp_path / "six.npz")
    assert main(["evaluate", "--config", "toy-1", "--checkpoint", str(tmp_path / "six.npz")]) == 4


def test_divergence_exit_code(tmp_path, monkeypatch):
    import reftraj.train
    from reftraj.train import TrainingDivergence

    def diverge(cfg, tasks=None, resume_from=None):
        raise TrainingDivergence("non-finite critic parameters")

    monkeypatch.setattr(reftraj.train, "train", diverge)
    assert main(["train", "--config", "toy-1", "--out-dir", str(tmp_path)]) == 3
