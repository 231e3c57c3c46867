import numpy as np
import pytest

from reftraj import data_path
from reftraj.agent import TD3Agent, TD3Config
from reftraj.env import TaskSpec, load_task
from reftraj.evaluate import (
    CheckpointMismatch,
    accelerations,
    compare_table,
    evaluate,
    load_trajectory_csv,
    metrics_from_trajectory,
    rollout_policy,
    run_baseline,
    save_agent,
)


def hold_still_agent(obs_dim, act_dim):
    agent = TD3Agent(obs_dim, act_dim, TD3Config(hidden=(8,)), np.random.default_rng(0))
    agent.actor.weights[-1][...] = 0.0
    agent.actor.biases[-1][...] = 0.0
    return agent


def straight_agent(task):
    """Policy with a constant action along the start-goal direction (zero hidden weights)."""
    agent = hold_still_agent(2 * task.dof, task.dof)
    direction = (task.goal - task.start) / task.max_speed
    agent.actor.biases[-1][...] = np.arctanh(0.5 * direction / np.abs(direction).max())
    return agent


def test_hold_still_times_out(tmp_path, empty_task):
    save_agent(hold_still_agent(4, 2), tmp_path / "still.npz")
    metrics, results = evaluate(tmp_path / "still.npz", empty_task, 1)
    assert not results[0].success and metrics[0].steps == empty_task.max_steps
    assert np.all(results[0].trajectory.angles == empty_task.start)


def test_start_equals_goal_immediate_success(empty_world):
    task = TaskSpec(empty_world, [0.3, 0.3], [0.3, 0.3])
    res = rollout_policy(hold_still_agent(4, 2), task)
    m = metrics_from_trajectory(res.trajectory, task.dt)
    assert res.success and m.steps == 0 and m.time_to_goal == 0.0


def test_dimension_mismatch(empty_task):
    with pytest.raises(CheckpointMismatch):
        rollout_policy(hold_still_agent(6, 2), empty_task)


def test_time_is_steps_times_dt_and_csv_recomputation(tmp_path, empty_task):
    agent = straight_agent(empty_task)
    metrics, results = evaluate(agent, empty_task, 1, out_dir=tmp_path)
    m = metrics[0]
    assert results[0].success
    assert m.time_to_goal == m.steps * empty_task.dt
    traj = load_trajectory_csv(tmp_path / "trajectory_0.csv")
    recomputed = np.abs(np.diff(traj.velocities, axis=0) / np.diff(traj.times)[:, None]).max(axis=0)
    assert np.allclose(recomputed, m.max_accel, rtol=1e-9)
    assert np.isclose(traj.times[-1], m.time_to_goal)
    assert (tmp_path / "accelerations.svg").read_text().startswith("<svg")
    assert (tmp_path / "eval_metrics.csv").exists()


def test_accelerations_from_velocities(empty_task):
    res = rollout_policy(straight_agent(empty_task), empty_task)
    acc = accelerations(res.trajectory)
    assert acc.shape == (res.steps, 2)
    # from rest to a constant command: one jump, then zero
    assert np.all(acc[1:] == 0.0) and np.any(acc[0] != 0.0)


def test_baseline_straight_line(tmp_path, empty_task):
    m, traj = run_baseline(empty_task, out_dir=tmp_path)
    assert m.success and m.method == "pid"
    assert (tmp_path / "baseline_trajectory.csv").exists()


def test_compare_table_layout(empty_task):
    base, _ = run_baseline(empty_task)
    rl = evaluate(straight_agent(empty_task), empty_task, 1)[0][0]
    table = compare_table([("t", base, rl)])
    lines = table.splitlines()
    assert lines[0].startswith("| Task | Baseline time")
    assert f"{base.time_to_goal:.3f}" in lines[2] and f"{rl.time_to_goal:.3f}" in lines[2]


def test_bundled_toy_baseline_succeeds():
    task = load_task(str(data_path("tasks", "toy-1.json")))
    m, _ = run_baseline(task)
    assert m.success
