"""Joint-space RRT, random shortcutting and arc-length resampling.

Paths are plain ``(m, n)`` float arrays, one joint vector per row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arm import WorldModel, check_collision, check_joint_limits, segment_collision_free


class PlanningError(RuntimeError):
    pass


@dataclass
class RRTConfig:
    step_size: float = 0.1
    goal_bias: float = 0.1
    max_iterations: int = 50_000
    goal_tolerance: float = 0.2
    edge_resolution: float = 0.02
    rng_seed: int = 0
    # samples are drawn from the start/goal bounding box padded by this much (radians),
    # clipped to the joint limits; None samples the full joint range
    sample_margin: float | None = 1.0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")


@dataclass
class ShortcutConfig:
    attempts: int = 200
    subdivision_distance: float = 0.02

    def __post_init__(self):
        if self.attempts < 0:
            raise ValueError("attempts must be non-negative")
        if self.subdivision_distance <= 0:
            raise ValueError("subdivision_distance must be positive")


def path_length(path) -> float:
    path = np.asarray(path, dtype=float)
    if len(path) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def rrt_plan(world: WorldModel, start, goal, cfg: RRTConfig | None = None) -> np.ndarray:
    """Grow a goal-biased RRT from ``start``; the returned path ends exactly at ``goal``."""
    cfg = cfg or RRTConfig()
    chain = world.chain
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    for name, q in (("start", start), ("goal", goal)):
        if check_joint_limits(chain, q):
            raise PlanningError(f"{name} violates joint limits")
        if check_collision(world, q):
            raise PlanningError(f"{name} is in collision")
    if np.array_equal(start, goal):
        return start[None].copy()
    rng = np.random.default_rng(cfg.rng_seed)
    res = cfg.edge_resolution
    lo, hi = chain.lower, chain.upper
    if cfg.sample_margin is not None:
        lo = np.maximum(lo, np.minimum(start, goal) - cfg.sample_margin)
        hi = np.minimum(hi, np.maximum(start, goal) + cfg.sample_margin)

    def connect_goal(q):
        return np.linalg.norm(goal - q) <= cfg.goal_tolerance and segment_collision_free(world, q, goal, res)

    nodes = np.empty((cfg.max_iterations + 1, chain.dof))
    parents = np.empty(cfg.max_iterations + 1, dtype=int)
    nodes[0] = start
    parents[0] = -1
    count = 1
    last = 0
    if not connect_goal(start):
        last = -1
        for _ in range(cfg.max_iterations):
            if rng.random() < cfg.goal_bias:
                sample = goal
            else:
                sample = rng.uniform(lo, hi)
            d = np.linalg.norm(nodes[:count] - sample, axis=1)
            near = int(np.argmin(d))
            if d[near] == 0.0:
                continue
            if d[near] > cfg.step_size:
                new = nodes[near] + (sample - nodes[near]) * (cfg.step_size / d[near])
            else:
                new = sample
            if not segment_collision_free(world, nodes[near], new, res):
                continue
            nodes[count] = new
            parents[count] = near
            count += 1
            if connect_goal(new):
                last = count - 1
                break
        if last < 0:
            raise PlanningError(f"no path found within {cfg.max_iterations} iterations")
    chain_idx = []
    i = last
    while i >= 0:
        chain_idx.append(i)
        i = parents[i]
    path = nodes[chain_idx[::-1]]
    if np.array_equal(path[-1], goal):
        return path.copy()
    return np.vstack([path, goal])


def shortcut(world: WorldModel, path, cfg: ShortcutConfig | None = None, rng=None) -> np.ndarray:
    """Random shortcutting: join two random vertices directly when the straight segment is free."""
    cfg = cfg or ShortcutConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    path = np.array(path, dtype=float)
    for _ in range(cfg.attempts):
        m = len(path)
        if m < 3:
            break
        i, j = np.sort(rng.choice(m, size=2, replace=False))
        if j - i < 2:
            continue
        if segment_collision_free(world, path[i], path[j], cfg.subdivision_distance):
            path = np.vstack([path[: i + 1], path[j:]])
    return path


def resample_path(path, interval: float) -> np.ndarray:
    """Points at arc-length spacing ``interval`` along the polyline, endpoints kept."""
    if interval <= 0:
        raise ValueError("interval must be positive")
    path = np.asarray(path, dtype=float)
    if len(path) < 2:
        return path.copy()
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total == 0.0:
        return path[:1].copy()
    s = np.arange(0.0, total, interval)
    if total - s[-1] > 1e-12 * max(1.0, total):
        s = np.append(s, total)
    else:
        s[-1] = total
    idx = np.clip(np.searchsorted(arc, s, side="right") - 1, 0, len(seg) - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(seg[idx] > 0, (s - arc[idx]) / seg[idx], 0.0)
    out = path[idx] + frac[:, None] * (path[idx + 1] - path[idx])
    out[0] = path[0]
    out[-1] = path[-1]
    return out


def save_path_csv(path, filename) -> None:
    np.savetxt(
        filename,
        np.degrees(np.asarray(path, dtype=float)),
        delimiter=",",
        header=",".join(f"q{j + 1}_deg" for j in range(np.shape(path)[1])),
        comments="",
        fmt="%.10g",
    )


def load_path_csv(filename) -> np.ndarray:
    return np.radians(np.atleast_2d(np.loadtxt(filename, delimiter=",", skiprows=1)))
