"""Deterministic policy rollouts, baseline runs, trajectory export and the comparison table."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import TD3Agent, TD3Config
from .arm import check_collision
from .env import ArmState, TaskSpec, is_terminal, reward_f, step
from .pid import Trajectory, pid_baseline


class CheckpointMismatch(ValueError):
    pass


@dataclass
class RolloutResult:
    trajectory: Trajectory
    return_f: float

    @property
    def success(self) -> bool:
        return self.trajectory.reached and not self.trajectory.collided

    @property
    def steps(self) -> int:
        return self.trajectory.steps

    @property
    def collided(self) -> bool:
        return self.trajectory.collided


@dataclass
class RunMetrics:
    task: str
    method: str
    reached: bool
    collided: bool
    steps: int
    dt: float
    max_accel: np.ndarray  # per joint, rad/s^2
    path_length: float

    @property
    def time_to_goal(self) -> float:
        return self.steps * self.dt

    @property
    def success(self) -> bool:
        return self.reached and not self.collided

    def row(self) -> dict:
        d = {
            "task": self.task, "method": self.method, "reached": int(self.reached), "collided": int(self.collided),
            "steps": self.steps, "time_s": repr(self.time_to_goal), "path_length": repr(self.path_length),
        }
        for j, a in enumerate(self.max_accel):
            d[f"max_accel_{j + 1}"] = repr(float(a))
        return d


def accelerations(traj: Trajectory) -> np.ndarray:
    """Finite-difference joint accelerations from the commanded velocities, one row per step."""
    if traj.steps == 0:
        return np.zeros((0, traj.angles.shape[1]))
    return np.diff(traj.velocities, axis=0) / np.diff(traj.times)[:, None]


def metrics_from_trajectory(traj: Trajectory, dt: float, task: str = "", method: str = "") -> RunMetrics:
    acc = accelerations(traj)
    max_acc = np.abs(acc).max(axis=0) if len(acc) else np.zeros(traj.angles.shape[1])
    length = float(np.linalg.norm(np.diff(traj.angles, axis=0), axis=1).sum())
    return RunMetrics(task, method, traj.reached, traj.collided, traj.steps, dt, max_acc, length)


def rollout_policy(agent: TD3Agent, task: TaskSpec, goal_conditioned: bool = False, start=None,
                   curriculum=None) -> RolloutResult:
    """Greedy rollout under the final curriculum stage (smallest goal radius, collisions on)."""
    curriculum = curriculum or task.final_curriculum()
    expected = task.dof * (3 if goal_conditioned else 2)
    if agent.obs_dim != expected or agent.act_dim != task.dof:
        raise CheckpointMismatch(f"policy expects obs {agent.obs_dim}/act {agent.act_dim}, task gives {expected}/{task.dof}")
    chain = task.world.chain
    theta = task.start.copy() if start is None else np.clip(np.asarray(start, dtype=float), chain.lower, chain.upper)
    state = ArmState(theta, np.zeros(task.dof))
    times, angles, vels, cmds = [0.0], [theta.copy()], [state.velocities], [np.zeros(task.dof)]
    collided = bool(check_collision(task.world, theta)) if task.world.obstacles else False
    ret = 0.0
    k = 0
    status = is_terminal(task, curriculum, theta, 0)
    while status is None:
        parts = [state.angles, state.velocities] + ([task.goal] if goal_conditioned else [])
        a = agent.select_action(np.concatenate(parts))
        prev = state
        state, violated = step(task, prev, a)
        k += 1
        hit = bool(check_collision(task.world, state.angles)) if task.world.obstacles else False
        collided |= hit
        r, _ = reward_f(task, curriculum, state, prev.velocities, hit, violated)
        ret += r
        times.append(k * task.dt)
        angles.append(state.angles)
        vels.append(state.velocities)
        cmds.append(np.asarray(a, dtype=float))
        status = is_terminal(task, curriculum, state.angles, k)
    traj = Trajectory(np.array(times), np.array(angles), np.array(vels), np.array(cmds), status == "goal", collided)
    return RolloutResult(traj, ret)


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """Rows of time, angles (deg), velocities (deg/s) and normalized commands."""
    n = traj.angles.shape[1]
    header = ["t"] + [f"q{j + 1}_deg" for j in range(n)] + [f"v{j + 1}_deg_s" for j in range(n)] + [f"a{j + 1}" for j in range(n)]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for t, q, v, a in zip(traj.times, np.degrees(traj.angles), np.degrees(traj.velocities), traj.commands):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in (*q, *v, *a)])


def load_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 1) // 3
    return Trajectory(data[:, 0], np.radians(data[:, 1 : 1 + n]), np.radians(data[:, 1 + n : 1 + 2 * n]),
                      data[:, 1 + 2 * n :], False, False)


def save_agent(agent: TD3Agent, path) -> None:
    from .agent import config_to_dict

    d = agent.state_dict()
    d["meta"] = np.array(json.dumps({"config": {"td3": config_to_dict(agent.cfg)}}))
    with open(path, "wb") as f:
        np.savez(f, **d)


def load_policy(path):
    """Agent plus goal-conditioning flag from a training checkpoint or a bare agent file."""
    with np.load(path) as z:
        d = {k: z[k] for k in z.files}
    meta = json.loads(str(d["meta"])) if "meta" in d else {}
    cfg = meta.get("config", {})
    agent = TD3Agent.from_state_dict(d, TD3Config(**cfg.get("td3", {})))
    return agent, bool(cfg.get("goal_conditioned", False))


def evaluate(checkpoint, task: TaskSpec, episodes: int = 1, out_dir=None, start_noise: float = 0.0, seed: int = 0):
    """Roll out the stored policy ``episodes`` times; the first episode always starts at the task start.

    Returns ``(metrics list, rollout results)``; with ``out_dir`` the trajectories and metrics are
    written as CSV and the first rollout's accelerations as SVG.
    """
    agent, goal_conditioned = load_policy(checkpoint) if not isinstance(checkpoint, TD3Agent) else (checkpoint, False)
    rng = np.random.default_rng(seed)
    results, metrics = [], []
    for i in range(episodes):
        start = None
        if start_noise > 0 and i > 0:
            start = task.start + rng.uniform(-start_noise, start_noise, task.dof)
        res = rollout_policy(agent, task, goal_conditioned, start)
        results.append(res)
        metrics.append(metrics_from_trajectory(res.trajectory, task.dt, task.name, "rl"))
    if out_dir is not None:
        out = Path(out_dir)
        for i, res in enumerate(results):
            save_trajectory_csv(res.trajectory, out / f"trajectory_{i}.csv")
        write_metrics_csv(metrics, out / "eval_metrics.csv")
        from .plots import acceleration_svg

        acceleration_svg(results[0].trajectory, out / "accelerations.svg", title=f"{task.name}: policy")
    return metrics, results


def run_baseline(task: TaskSpec, gains=None, reference=None, out_dir=None, seed: int = 0):
    """PID tracking of the planned (and shortcut) reference; same metrics schema as :func:`evaluate`."""
    from .train import plan_reference

    ref = reference if reference is not None else plan_reference(task, seed)
    traj = pid_baseline(task, ref.vertices, gains)
    m = metrics_from_trajectory(traj, task.dt, task.name, "pid")
    if out_dir is not None:
        out = Path(out_dir)
        save_trajectory_csv(traj, out / "baseline_trajectory.csv")
        write_metrics_csv([m], out / "baseline_metrics.csv")
        from .plots import acceleration_svg

        acceleration_svg(traj, out / "baseline_accelerations.svg", title=f"{task.name}: PID baseline")
    return m, traj


def write_metrics_csv(metrics, path) -> None:
    rows = [m.row() for m in metrics]
    if not rows:
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def compare_table(pairs) -> str:
    """Time-to-goal table, one row per task: ``pairs`` holds (task name, baseline, rl) metrics."""
    lines = ["| Task | Baseline time [s] | RL time [s] | Baseline max accel [rad/s^2] | RL max accel [rad/s^2] |",
             "|---|---|---|---|---|"]
    for name, base, rl in pairs:
        def fmt(m):
            return f"{m.time_to_goal:.3f}" if m.success else f"failed ({m.time_to_goal:.3f})"
        lines.append(f"| {name} | {fmt(base)} | {fmt(rl)} | {base.max_accel.max():.2f} | {rl.max_accel.max():.2f} |")
    return "\n".join(lines)
