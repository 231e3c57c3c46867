import numpy as np
import pytest

from reftraj import data_path
from reftraj.agent import TD3Config
from reftraj.arm import check_collision, forward_kinematics
from reftraj.env import load_task
from reftraj.goalgen import GoalGenReport, GoalGenSpec, GoalSamplingError, build_trainer, goal_generalize, sample_goals
from reftraj.train import TrainConfig


@pytest.fixture(scope="module")
def toy_file():
    return str(data_path("tasks", "toy-1.json"))


def test_goals_lie_in_rectangle(toy_file):
    spec = GoalGenSpec.from_task_file(toy_file, width_mm=100, height_mm=60)
    goals = sample_goals(spec, 20, np.random.default_rng(0))
    for q in goals:
        p = forward_kinematics(spec.task.world.chain, q).end_effector - spec.center
        assert abs(p @ spec.u) <= 0.05 + 1e-4 and abs(p @ spec.v) <= 0.03 + 1e-4
        assert not check_collision(spec.task.world, q)


def test_zero_rectangle_degenerates_to_task_goal(toy_file):
    spec = GoalGenSpec.from_task_file(toy_file, width_mm=0, height_mm=0)
    goals = sample_goals(spec, 3, np.random.default_rng(0))
    assert all(np.array_equal(g, spec.task.goal) for g in goals)


def test_unreachable_rectangle_raises(toy_file):
    spec = GoalGenSpec.from_task_file(toy_file, center=[5.0, 5.0, 0.0], max_attempts=5)
    with pytest.raises(GoalSamplingError):
        sample_goals(spec, 1, np.random.default_rng(0))


def test_spec_validation(toy_file):
    task = load_task(toy_file)
    with pytest.raises(ValueError):
        GoalGenSpec(task, n_train=0)
    with pytest.raises(ValueError):
        GoalGenSpec(task, width_mm=-1)


def test_trainer_uses_per_goal_references_and_topk(toy_file):
    spec = GoalGenSpec.from_task_file(toy_file, n_train=3)
    tr, tasks = build_trainer(spec, TrainConfig(seed=0, td3=TD3Config(hidden=(8,))))
    assert len(tr.references) == 3 and tr.cfg.goal_conditioned and tr.topk.k == 2
    for t, ref in zip(tasks, tr.references):
        assert np.array_equal(ref.path[-1], t.goal)
    assert tr.env.obs_dim == 6


def test_report_layout():
    r = GoalGenReport(100, 100, 10, 9, 50, 47)
    assert np.isclose(r.overall, 56 / 60)
    assert "| 100 x 100 | 10 | 9/10 | 47/50 | 0.933 |" in r.table()


def test_goal_generalize_smoke(tmp_path, toy_file):
    spec = GoalGenSpec.from_task_file(toy_file, n_train=2, n_test=3)
    cfg = TrainConfig(budget=600, seed=0, learning_starts=300, random_steps=300, eval_interval=0,
                      td3=TD3Config(hidden=(8,), batch_size=16))
    report, tr = goal_generalize(spec, cfg, tmp_path)
    assert report.n_train == 2 and report.n_test == 3
    assert (tmp_path / "goalgen_report.md").exists() and (tmp_path / "checkpoint.npz").exists()
