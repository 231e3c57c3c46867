"""Prioritized replay (sum tree) and the top-K episode buffer used for self-imitation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SumTree:
    """Array-backed binary sum tree over a power-of-two number of leaves.

    ``find`` descends all queries level by level with vectorized numpy, which is what
    keeps batch sampling cheap.
    """

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.n_leaves = 1 << max(int(np.ceil(np.log2(max(capacity, 1)))), 0)
        self.tree = np.zeros(2 * self.n_leaves)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def leaves(self, idx=None) -> np.ndarray:
        leaves = self.tree[self.n_leaves : self.n_leaves + self.capacity]
        return leaves if idx is None else leaves[idx]

    def set(self, idx, values) -> None:
        if np.ndim(idx) == 0:
            node = int(idx) + self.n_leaves
            tree = self.tree
            tree[node] = float(values)
            node //= 2
            while node >= 1:
                tree[node] = tree[2 * node] + tree[2 * node + 1]
                node //= 2
            return
        node = np.asarray(idx, dtype=int) + self.n_leaves
        self.tree[node] = values
        # duplicate parents just rewrite the same sum
        node = node // 2
        while node[0] >= 1:
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1]
            node = node // 2

    def find(self, mass) -> np.ndarray:
        """Leaf indices whose cumulative-sum interval contains each query mass."""
        mass = np.array(mass, dtype=float)
        node = np.ones(mass.shape, dtype=int)
        while node[0] < self.n_leaves:
            left = 2 * node
            left_sum = self.tree[left]
            go_right = mass >= left_sum
            mass = np.where(go_right, mass - left_sum, mass)
            node = np.where(go_right, left + 1, left)
        return node - self.n_leaves


class PrioritizedReplayBuffer:
    """FIFO ring of transitions sampled with probability ``p_i**alpha / sum_j p_j**alpha``."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int = 100_000, alpha=0.6, beta=0.4, eps=1e-6):
        self.capacity = int(capacity)
        self.alpha, self.beta, self.eps = alpha, beta, eps
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.priority = np.zeros(capacity)
        self.tree = SumTree(capacity)
        self.max_priority = 1.0
        self.size = 0
        self.next_idx = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done) -> int:
        i = self.next_idx
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = done
        self.priority[i] = self.max_priority
        self.tree.set(i, self.max_priority**self.alpha)
        self.next_idx = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def probabilities(self) -> np.ndarray:
        p = self.tree.leaves()[: self.size]
        return p / p.sum()

    def sample(self, batch_size: int, rng):
        """Returns ``(batch, weights, indices)``; weights are ``(N P(i))**-beta`` over their batch max."""
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        total = self.tree.total
        idx = self.tree.find(rng.random(batch_size) * total)
        # guard against float round-off landing on an empty leaf
        idx = np.minimum(idx, self.size - 1)
        prob = self.tree.leaves(idx) / total
        w = (self.size * prob) ** (-self.beta)
        w /= w.max()
        batch = Batch(self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx])
        return batch, w, idx

    def update_priorities(self, idx, td_errors) -> None:
        idx = np.asarray(idx, dtype=int)
        if np.any(idx < 0) or np.any(idx >= self.size):
            raise IndexError("priority update for a slot that holds no transition")
        p = np.abs(np.asarray(td_errors, dtype=float)) + self.eps
        self.priority[idx] = p
        self.tree.set(idx, p**self.alpha)
        self.max_priority = max(self.max_priority, float(p.max()))

    def state_dict(self, prefix="per") -> dict:
        n = self.size
        return {
            f"{prefix}/obs": self.obs[:n].copy(),
            f"{prefix}/act": self.act[:n].copy(),
            f"{prefix}/rew": self.rew[:n].copy(),
            f"{prefix}/next_obs": self.next_obs[:n].copy(),
            f"{prefix}/done": self.done[:n].copy(),
            f"{prefix}/priority": self.priority[:n].copy(),
            f"{prefix}/meta": np.array([self.capacity, self.size, self.next_idx, self.max_priority, self.alpha, self.beta, self.eps]),
        }

    @classmethod
    def from_state_dict(cls, d, prefix="per") -> "PrioritizedReplayBuffer":
        capacity, size, next_idx, max_p, alpha, beta, eps = d[f"{prefix}/meta"]
        obs = d[f"{prefix}/obs"]
        buf = cls(obs.shape[1], d[f"{prefix}/act"].shape[1], int(capacity), alpha, beta, eps)
        n = int(size)
        for name in ("obs", "act", "rew", "next_obs", "done", "priority"):
            getattr(buf, name)[:n] = d[f"{prefix}/{name}"]
        buf.size, buf.next_idx, buf.max_priority = n, int(next_idx), float(max_p)
        if n:
            buf.tree.set(np.arange(n), buf.priority[:n] ** alpha)
        return buf


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    def __len__(self):
        return len(self.rew)


@dataclass
class EpisodeRecord:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    reached_goal: bool
    had_collision: bool
    goal_id: int = 0

    @property
    def steps(self) -> int:
        return len(self.rew)

    @property
    def total_reward(self) -> float:
        return float(self.rew.sum())


@dataclass
class TopKBuffer:
    """Best ``k`` goal-reaching, collision-free episodes by return, kept per goal id."""

    k: int = 5
    episodes: dict = field(default_factory=dict)

    def __post_init__(self):
        self._cache = None

    def offer(self, ep: EpisodeRecord) -> bool:
        if not ep.reached_goal or ep.had_collision or ep.steps == 0:
            return False
        kept = self.episodes.setdefault(ep.goal_id, [])
        if len(kept) >= self.k and ep.total_reward <= kept[-1].total_reward:
            return False
        kept.append(ep)
        kept.sort(key=lambda e: e.total_reward, reverse=True)
        del kept[self.k :]
        self._cache = None
        return True

    def __len__(self):
        return sum(len(v) for v in self.episodes.values())

    def full(self, n_goals: int = 1) -> bool:
        return len(self) >= self.k * n_goals

    def fraction_filled(self, n_goals: int) -> float:
        """Share of per-goal buffers holding at least one episode."""
        return sum(1 for v in self.episodes.values() if v) / n_goals

    def transitions(self):
        if self._cache is None:
            eps = [e for v in self.episodes.values() for e in v]
            self._cache = (np.concatenate([e.obs for e in eps]), np.concatenate([e.act for e in eps]))
        return self._cache

    def sample(self, batch_size: int, rng):
        """Uniform draw over every stored transition."""
        obs, act = self.transitions()
        idx = rng.integers(len(obs), size=batch_size)
        return obs[idx], act[idx]

    def rewards(self, goal_id=0) -> list[float]:
        return [e.total_reward for e in self.episodes.get(goal_id, [])]

    def state_dict(self, prefix="topk") -> dict:
        out = {f"{prefix}/k": np.array(self.k)}
        i = 0
        for eps in self.episodes.values():
            for e in eps:
                p = f"{prefix}/{i}"
                out.update({
                    f"{p}/obs": e.obs, f"{p}/act": e.act, f"{p}/rew": e.rew,
                    f"{p}/next_obs": e.next_obs, f"{p}/done": e.done,
                    f"{p}/flags": np.array([e.reached_goal, e.had_collision, e.goal_id]),
                })
                i += 1
        out[f"{prefix}/count"] = np.array(i)
        return out

    @classmethod
    def from_state_dict(cls, d, prefix="topk") -> "TopKBuffer":
        buf = cls(int(d[f"{prefix}/k"]))
        for i in range(int(d[f"{prefix}/count"])):
            p = f"{prefix}/{i}"
            reached, collided, gid = d[f"{p}/flags"]
            ep = EpisodeRecord(d[f"{p}/obs"], d[f"{p}/act"], d[f"{p}/rew"], d[f"{p}/next_obs"], d[f"{p}/done"],
                               bool(reached), bool(collided), int(gid))
            buf.episodes.setdefault(ep.goal_id, []).append(ep)
        return buf
