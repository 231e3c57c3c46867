"""Joint-velocity reaching MDP with reference-path reward shaping and a curriculum.

The per-step reward is ``reward_f + reward_h``: the task term (goal distance, goal bonus,
collision and joint-limit penalties, acceleration and step cost) plus the reference term
(distance to the resampled reference path and progress along it).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .arm import WorldModel, check_collision, check_joint_limits, load_world, segment_collision_free
from .planner import RRTConfig, ShortcutConfig, resample_path


@dataclass
class RewardWeights:
    w_goal_dist: float = -0.5
    w_goal: float = 50.0
    w_collision: float = -10.0  # final value; the curriculum ramps toward it
    w_limit: float = -5.0
    w_accel: float = -0.001
    w_step: float = -0.1
    w_path: float = -1.0
    w_progress: float = 0.5

    def __post_init__(self):
        for name, sign in (("w_goal_dist", -1), ("w_goal", 1), ("w_collision", -1), ("w_limit", -1),
                           ("w_accel", -1), ("w_step", -1), ("w_path", -1), ("w_progress", 1)):
            v = getattr(self, name)
            if not np.isfinite(v) or v * sign < 0:
                raise ValueError(f"{name}={v} has the wrong sign or is not finite")

    @classmethod
    def from_list(cls, w) -> "RewardWeights":
        return cls(*map(float, w))

    def as_list(self) -> list[float]:
        return list(asdict(self).values())


@dataclass
class CurriculumSchedule:
    r_goal_start: float = 0.52
    r_goal_end: float = 0.26
    radius_goals: int = 100  # goals over which r_goal shrinks; collisions ignored meanwhile
    penalty_goals: int = 200  # goal count at which the collision penalty is fully ramped
    enabled: bool = True


@dataclass(frozen=True)
class CurriculumState:
    t_goal: int
    r_goal: float
    w_collision: float
    collision_enabled: bool


def curriculum_state(schedule: CurriculumSchedule, w_collision_final: float, t_goal: int = 0) -> CurriculumState:
    if not schedule.enabled:
        return CurriculumState(t_goal, schedule.r_goal_end, w_collision_final, True)
    n1, n2 = schedule.radius_goals, schedule.penalty_goals
    if t_goal < n1:
        r = schedule.r_goal_start + (schedule.r_goal_end - schedule.r_goal_start) * t_goal / n1
        return CurriculumState(t_goal, r, 0.0, False)
    if t_goal < n2:
        return CurriculumState(t_goal, schedule.r_goal_end, w_collision_final * (t_goal - n1) / (n2 - n1), True)
    return CurriculumState(t_goal, schedule.r_goal_end, w_collision_final, True)


def curriculum_on_goal(state: CurriculumState, schedule: CurriculumSchedule, w_collision_final: float) -> CurriculumState:
    return curriculum_state(schedule, w_collision_final, state.t_goal + 1)


@dataclass
class TaskSpec:
    world: WorldModel
    start: np.ndarray
    goal: np.ndarray
    dt: float = 0.0035
    max_steps: int = 300
    p_reset: float = 0.3
    weights: RewardWeights = field(default_factory=RewardWeights)
    curriculum: CurriculumSchedule = field(default_factory=CurriculumSchedule)
    division_interval: float = 0.05
    rrt: RRTConfig = field(default_factory=RRTConfig)
    shortcut: ShortcutConfig = field(default_factory=ShortcutConfig)
    pid_gains: tuple = (4.0, 0.0, 0.2)
    capture_radius: float = 0.05
    pid_max_steps: int | None = None  # baseline step allowance; defaults to max_steps
    name: str = "task"

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.p_reset <= 1.0:
            raise ValueError("p_reset must lie in [0, 1]")
        for name, q in (("start", self.start), ("goal", self.goal)):
            if len(q) != self.world.chain.dof:
                raise ValueError(f"{name} has {len(q)} joints, chain has {self.world.chain.dof}")
            if check_joint_limits(self.world.chain, q) or check_collision(self.world, q):
                raise ValueError(f"{name} is outside the joint limits or in collision")

    @property
    def dof(self) -> int:
        return self.world.chain.dof

    @property
    def max_speed(self) -> np.ndarray:
        return self.world.chain.max_speed

    def initial_curriculum(self) -> CurriculumState:
        return curriculum_state(self.curriculum, self.weights.w_collision)

    def final_curriculum(self) -> CurriculumState:
        return curriculum_state(replace(self.curriculum, enabled=False), self.weights.w_collision)


def load_task(path, world: WorldModel | None = None) -> TaskSpec:
    path = Path(path)
    d = json.loads(path.read_text())
    if world is None:
        world = load_world(path.parent / d["world_file"] if not Path(d["world_file"]).is_absolute() else d["world_file"])
    w = d.get("reward_weights", {})
    weights = RewardWeights.from_list(w) if isinstance(w, list) else RewardWeights(**w)
    return TaskSpec(
        world=world,
        start=np.radians(d["theta_start_deg"]),
        goal=np.radians(d["theta_goal_deg"]),
        dt=d.get("dt", 0.0035),
        max_steps=d.get("max_steps", 300),
        p_reset=d.get("p_reset", 0.3),
        weights=weights,
        curriculum=CurriculumSchedule(**d.get("curriculum", {})),
        division_interval=d.get("division_interval", 0.05),
        rrt=RRTConfig(**d.get("rrt", {})),
        shortcut=ShortcutConfig(**d.get("shortcut", {})),
        pid_gains=tuple(d.get("pid", {}).get("gains", (4.0, 0.0, 0.2))),
        capture_radius=d.get("pid", {}).get("capture_radius", 0.05),
        pid_max_steps=d.get("pid", {}).get("max_steps"),
        name=d.get("name", path.stem),
    )


@dataclass
class ArmState:
    angles: np.ndarray
    velocities: np.ndarray


@dataclass
class ReferenceTrajectory:
    path: np.ndarray
    vertices: np.ndarray
    steps: int | None = None  # None marks the planner's path, which any qualifying episode beats
    reward: float = -np.inf

    @classmethod
    def from_path(cls, path, interval: float, steps=None, reward=-np.inf) -> "ReferenceTrajectory":
        path = np.asarray(path, dtype=float)
        return cls(path, resample_path(path, interval), steps, reward)


def step(task: TaskSpec, state: ArmState, action) -> tuple[ArmState, bool]:
    """Integrate one control period. Returns the new state and whether a joint limit was hit.

    Out-of-range joints are flagged, then clamped back to the limit.
    """
    v = np.clip(action, -1.0, 1.0) * task.max_speed
    theta = state.angles + v * task.dt
    chain = task.world.chain
    violated = check_joint_limits(chain, theta)
    if violated:
        theta = np.clip(theta, chain.lower, chain.upper)
    return ArmState(theta, v), violated


def reward_f(task, curriculum: CurriculumState, state: ArmState, prev_velocity, collided: bool, limit_violation: bool):
    """Task reward for arriving in ``state``; returns ``(value, flags)``."""
    w = task.weights
    d_goal = float(np.linalg.norm(state.angles - task.goal))
    reached = d_goal <= curriculum.r_goal
    collision = bool(collided and curriculum.collision_enabled)
    accel = float(np.linalg.norm((state.velocities - prev_velocity) / task.dt))
    value = (
        w.w_goal_dist * d_goal
        + w.w_goal * reached
        + curriculum.w_collision * collision
        + w.w_limit * limit_violation
        + w.w_accel * accel
        + w.w_step
    )
    return value, {"goal": reached, "collision": collision, "limit": bool(limit_violation)}


def _distances(points, vertices) -> np.ndarray:
    diff = points[:, None, :] - vertices[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def nni(theta, vertices) -> int:
    """Index of the nearest reference vertex; ties go to the lower index."""
    diff = np.asarray(vertices) - theta
    return int(np.argmin((diff * diff).sum(axis=1)))


def d_path(theta_prev, theta, vertices, interval: float) -> float:
    """Largest distance from the resampled motion ``theta_prev -> theta`` to the nearest reference vertex."""
    seg = resample_path(np.stack([theta_prev, theta]), interval)
    return float(_distances(seg, np.asarray(vertices)).min(axis=1).max())


def reward_h(task: TaskSpec, vertices, theta, theta_prev) -> float:
    w = task.weights
    if w.w_path == 0.0 and w.w_progress == 0.0:
        return 0.0
    dist = d_path(theta_prev, theta, vertices, task.division_interval)
    progress = nni(theta, vertices) - nni(theta_prev, vertices)
    return w.w_path * dist + w.w_progress * progress


def is_terminal(task: TaskSpec, curriculum: CurriculumState, theta, step_count: int, max_steps: int | None = None):
    """``"goal"``, ``"timeout"`` or None; the goal wins when both hold."""
    if np.linalg.norm(theta - task.goal) <= curriculum.r_goal:
        return "goal"
    if step_count >= (task.max_steps if max_steps is None else max_steps):
        return "timeout"
    return None


def reset(task: TaskSpec, ref: ReferenceTrajectory, rng) -> ArmState:
    """Task start with probability ``1 - p_reset``, otherwise a uniform reference vertex; zero velocity."""
    if rng.random() < task.p_reset:
        theta = ref.vertices[rng.integers(len(ref.vertices))].copy()
    else:
        theta = task.start.copy()
    return ArmState(theta, np.zeros(task.dof))


def agent_path(visited, world: WorldModel | None = None, goal=None, resolution: float = 0.02) -> np.ndarray:
    """Visited joint angles with repeats removed; the exact goal is appended when it can be reached straight."""
    visited = np.asarray(visited, dtype=float)
    keep = np.ones(len(visited), dtype=bool)
    keep[1:] = np.any(np.diff(visited, axis=0) != 0.0, axis=1)
    path = visited[keep]
    if goal is not None and not np.array_equal(path[-1], goal):
        if world is None or segment_collision_free(world, path[-1], goal, resolution):
            path = np.vstack([path, goal])
    return path


def maybe_update_reference(ref: ReferenceTrajectory, episode, path, interval: float):
    """Swap in the agent's path if the episode reached the goal collision-free and beats the
    reference on steps, with cumulative reward breaking ties."""
    if not episode.reached_goal or episode.had_collision:
        return ref, False
    steps, reward = episode.steps, episode.total_reward
    better = ref.steps is None or steps < ref.steps or (steps == ref.steps and reward > ref.reward)
    if not better:
        return ref, False
    return ReferenceTrajectory.from_path(path, interval, steps, reward), True


class ReachEnv:
    """Stateful wrapper used for rollouts; caches the nearest-vertex index between steps."""

    def __init__(self, task: TaskSpec, reference: ReferenceTrajectory, curriculum: CurriculumState | None = None,
                 goal_conditioned: bool = False):
        self.task = task
        self.reference = reference
        self.curriculum = curriculum or task.initial_curriculum()
        self.goal_conditioned = goal_conditioned
        self.state = ArmState(task.start.copy(), np.zeros(task.dof))
        self.steps = 0
        self._nni = 0

    @property
    def obs_dim(self) -> int:
        return self.task.dof * (3 if self.goal_conditioned else 2)

    def observe(self) -> np.ndarray:
        parts = [self.state.angles, self.state.velocities]
        if self.goal_conditioned:
            parts.append(self.task.goal)
        return np.concatenate(parts)

    def set_state(self, state: ArmState) -> np.ndarray:
        self.state = state
        self.steps = 0
        self._nni = nni(state.angles, self.reference.vertices)
        return self.observe()

    def reset(self, rng=None, from_start: bool = False) -> np.ndarray:
        if from_start or rng is None:
            state = ArmState(self.task.start.copy(), np.zeros(self.task.dof))
        else:
            state = reset(self.task, self.reference, rng)
        return self.set_state(state)

    def terminal(self):
        return is_terminal(self.task, self.curriculum, self.state.angles, self.steps)

    def step(self, action):
        task = self.task
        prev = self.state
        self.state, violated = step(task, prev, action)
        self.steps += 1
        theta = self.state.angles
        collided = bool(check_collision(task.world, theta)) if task.world.obstacles else False
        rf, flags = reward_f(task, self.curriculum, self.state, prev.velocities, collided, violated)
        rh = 0.0
        w = task.weights
        if w.w_path != 0.0 or w.w_progress != 0.0:
            verts = self.reference.vertices
            idx = nni(theta, verts)
            rh = w.w_path * d_path(prev.angles, theta, verts, task.division_interval) + w.w_progress * (idx - self._nni)
            self._nni = idx
        status = self.terminal()
        info = {
            "reward_f": rf,
            "reward_h": rh,
            "collided": collided,
            "limit": violated,
            "reached": status == "goal",
            "status": status,
        }
        return self.observe(), rf + rh, status, info
