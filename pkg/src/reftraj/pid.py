"""Per-joint PID tracking of a resampled reference path (the comparison baseline)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arm import check_collision
from .env import CurriculumState, TaskSpec, is_terminal


class DivergenceError(RuntimeError):
    pass


@dataclass
class Trajectory:
    """Timed rollout: ``angles[k]`` at ``times[k]``; ``velocities[k]`` is the command applied
    over ``(t_{k-1}, t_k]``; ``commands`` are the normalized actions in [-1, 1]."""

    times: np.ndarray
    angles: np.ndarray
    velocities: np.ndarray
    commands: np.ndarray
    reached: bool
    collided: bool

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def duration(self) -> float:
        return float(self.times[-1])


def pid_baseline(
    task: TaskSpec,
    vertices,
    gains=None,
    dt: float | None = None,
    curriculum: CurriculumState | None = None,
    capture_radius: float | None = None,
    divergence_bound: float | None = None,
    max_steps: int | None = None,
) -> Trajectory:
    """Track ``vertices`` one at a time; move to the next target once within ``capture_radius``.

    Velocity commands are ``Kp e + Ki sum(e) dt + Kd (e - e_prev) / dt`` per joint, clamped to
    the joint speed limits. Raises DivergenceError if the tracking error exceeds
    ``divergence_bound`` (default: reference length plus 2*pi).
    """
    kp, ki, kd = gains if gains is not None else task.pid_gains
    dt = task.dt if dt is None else dt
    curriculum = curriculum or task.final_curriculum()
    capture = task.capture_radius if capture_radius is None else capture_radius
    vertices = np.asarray(vertices, dtype=float)
    if max_steps is None:
        max_steps = task.pid_max_steps or task.max_steps
    if divergence_bound is None:
        divergence_bound = float(np.linalg.norm(np.diff(vertices, axis=0), axis=1).sum()) + 2 * np.pi
    vmax = task.max_speed
    chain = task.world.chain
    theta = task.start.copy()
    target = 0
    integral = np.zeros(task.dof)
    e_prev = None
    times, angles, vels, cmds = [0.0], [theta.copy()], [np.zeros(task.dof)], [np.zeros(task.dof)]
    collided = bool(check_collision(task.world, theta)) if task.world.obstacles else False
    k = 0
    status = is_terminal(task, curriculum, theta, k, max_steps)
    while status is None:
        while target < len(vertices) - 1 and np.linalg.norm(vertices[target] - theta) < capture:
            target += 1
        e = vertices[target] - theta
        if np.linalg.norm(e) > divergence_bound:
            raise DivergenceError(f"tracking error {np.linalg.norm(e):.3g} exceeds {divergence_bound:.3g}")
        integral += e * dt
        de = np.zeros_like(e) if e_prev is None else (e - e_prev) / dt
        e_prev = e
        v = np.clip(kp * e + ki * integral + kd * de, -vmax, vmax)
        theta = np.clip(theta + v * dt, chain.lower, chain.upper)
        k += 1
        times.append(k * dt)
        angles.append(theta.copy())
        vels.append(v)
        cmds.append(v / vmax)
        if task.world.obstacles and check_collision(task.world, theta):
            collided = True
        status = is_terminal(task, curriculum, theta, k, max_steps)
    return Trajectory(np.array(times), np.array(angles), np.array(vels), np.array(cmds), status == "goal", collided)
