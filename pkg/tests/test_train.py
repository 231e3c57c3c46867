import filecmp
from dataclasses import replace

import numpy as np
import pytest

from reftraj import data_path
from reftraj.agent import TD3Config
from reftraj.env import load_task
from reftraj.train import TrainConfig, Trainer, TrainingDivergence, apply_ablations, plan_reference, train


@pytest.fixture(scope="module")
def toy():
    return load_task(str(data_path("tasks", "toy-1.json")))


def small_cfg(**kw):
    base = dict(budget=2500, seed=3, learning_starts=500, random_steps=500, eval_interval=1000, eval_episodes=2,
                td3=TD3Config(hidden=(16, 16), batch_size=32))
    base.update(kw)
    return TrainConfig(**base)


def test_budget_zero_writes_initial_checkpoint(tmp_path, toy):
    cfg = small_cfg(budget=0, out_dir=str(tmp_path))
    tr = train(cfg, toy)
    assert tr.total_steps == 0 and tr.agent.critic_updates == 0
    assert (tmp_path / "checkpoint.npz").exists()
    again = Trainer.load(tmp_path / "checkpoint.npz")
    assert np.array_equal(again.agent.actor.params, tr.agent.actor.params)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(ablations=("no-everything",))
    with pytest.raises(ValueError):
        TrainConfig(budget=-1)
    with pytest.raises(ValueError):
        TrainConfig(update_cadence="sometimes")


def test_config_dict_roundtrip():
    cfg = small_cfg(ablations=("no-ref",))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_ablation_switches(toy):
    t = apply_ablations(toy, ("no-ref",))
    assert t.weights.w_path == 0.0 and t.weights.w_progress == 0.0 and t.curriculum.enabled
    t = apply_ablations(toy, ("no-curriculum",))
    assert not t.curriculum.enabled and t.weights.w_path == toy.weights.w_path


def test_one_update_cycle_per_episode(toy):
    tr = Trainer(small_cfg(budget=3000, eval_interval=0), toy)
    while tr.total_steps < 3000:
        before_steps, before_updates = tr.total_steps, tr.agent.critic_updates
        row = tr.run_episode()
        if row is None:
            continue
        stored = tr.total_steps
        expected = row["steps"] if len(tr.buffer) >= 500 else 0
        assert tr.agent.critic_updates - before_updates == expected
        assert stored - before_steps == row["steps"]


def test_samples_cadence(toy):
    tr = Trainer(small_cfg(budget=3000, eval_interval=0, update_cadence="samples"), toy)
    tr.run()
    assert tr.agent.critic_updates % 500 == 0
    assert tr.agent.critic_updates + tr.pending_samples == tr.total_steps


def test_same_seed_identical_metrics(tmp_path, toy):
    a = train(small_cfg(out_dir=str(tmp_path / "a")), toy)
    b = train(small_cfg(out_dir=str(tmp_path / "b")), toy)
    for name in ("episodes.csv", "evals.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)
    assert np.array_equal(a.agent.actor.params, b.agent.actor.params)
    c = train(small_cfg(seed=4), toy)
    assert c.episode_rows != a.episode_rows


def test_resume_matches_uninterrupted(tmp_path, toy):
    full = Trainer(small_cfg(), toy).run(2500)
    part = Trainer(small_cfg(), toy).run(1200)
    part.save(tmp_path / "mid.npz")
    resumed = Trainer.load(tmp_path / "mid.npz").run(2500)
    assert resumed.episode_rows == full.episode_rows
    assert resumed.eval_rows == full.eval_rows
    assert np.array_equal(resumed.agent.critic1.params, full.agent.critic1.params)


def test_episode_rows_schema(toy):
    tr = Trainer(small_cfg(budget=800, eval_interval=400), toy).run()
    row = tr.episode_rows[-1]
    assert set(row) >= {"return", "steps", "reached", "collided", "r_goal", "w_collision"}
    assert tr.eval_rows and 0.0 <= tr.eval_rows[0]["success_rate"] <= 1.0


def test_reference_planned_per_seed(toy):
    a, b = plan_reference(toy, 0), plan_reference(toy, 0)
    assert np.array_equal(a.path, b.path)
    assert a.steps is None


def test_divergence_detected(toy):
    tr = Trainer(small_cfg(budget=2000, eval_interval=0), toy)
    tr.run(600)
    tr.agent.critic1.params[0] = np.nan
    with pytest.raises(TrainingDivergence):
        tr.run(2000)
