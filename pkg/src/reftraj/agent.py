"""TD3 with prioritized replay and a Q-filtered behavioural-cloning term on top-K demonstrations."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .nnet import (
    MLP,
    AdamState,
    adam_from_state_dict,
    adam_state_dict,
    adam_step,
    forward,
    from_state_dict,
    gradient,
    polyak_update,
    state_dict,
)
from .replay import Batch


@dataclass
class TD3Config:
    gamma: float = 0.9
    target_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    exploration_noise: float = 0.1
    bc_weight: float = 1.0
    batch_size: int = 100
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    tau_decay: float = 0.995
    hidden: tuple = (128, 64)
    twin: bool = True  # False gives the single-critic (DDPG-style) target

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.noise_clip < 0 or self.policy_delay < 1 or self.bc_weight < 0:
            raise ValueError("invalid TD3 hyperparameters")


class TD3Agent:
    def __init__(self, obs_dim: int, act_dim: int, cfg: TD3Config | None = None, rng=None):
        self.cfg = cfg or TD3Config()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim, self.act_dim = obs_dim, act_dim
        h = self.cfg.hidden
        self.actor = MLP((obs_dim, *h, act_dim), "tanh", rng)
        self.critic1 = MLP((obs_dim + act_dim, *h, 1), "identity", rng)
        self.critic2 = MLP((obs_dim + act_dim, *h, 1), "identity", rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = AdamState.like(self.actor, lr=self.cfg.actor_lr)
        self.critic1_opt = AdamState.like(self.critic1, lr=self.cfg.critic_lr)
        self.critic2_opt = AdamState.like(self.critic2, lr=self.cfg.critic_lr)
        self.critic_updates = 0
        self.actor_updates = 0

    # acting

    def select_action(self, obs, explore: bool = False, rng=None) -> np.ndarray:
        a = forward(self.actor, obs)
        if explore:
            a = a + rng.normal(0.0, self.cfg.exploration_noise, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def q1(self, obs, act) -> np.ndarray:
        return forward(self.critic1, np.concatenate([obs, act], axis=-1))[..., 0]

    # learning

    def compute_target(self, batch: Batch, rng) -> np.ndarray:
        cfg = self.cfg
        a_next = forward(self.actor_target, batch.next_obs)
        if cfg.target_noise > 0:
            noise = np.clip(rng.normal(0.0, cfg.target_noise, size=a_next.shape), -cfg.noise_clip, cfg.noise_clip)
            a_next = np.clip(a_next + noise, -1.0, 1.0)
        x = np.concatenate([batch.next_obs, a_next], axis=1)
        q = forward(self.critic1_target, x)[:, 0]
        if cfg.twin:
            q = np.minimum(q, forward(self.critic2_target, x)[:, 0])
        return batch.rew + cfg.gamma * (1.0 - batch.done) * q

    def critic_update(self, batch: Batch, weights, rng) -> np.ndarray:
        """One Adam step per critic on the importance-weighted squared TD error.

        Returns ``|Q1 - y|`` for the priority refresh.
        """
        y = self.compute_target(batch, rng)
        x = np.concatenate([batch.obs, batch.act], axis=1)
        n = len(y)
        td = None
        critics = [(self.critic1, self.critic1_opt)]
        if self.cfg.twin:
            critics.append((self.critic2, self.critic2_opt))
        for net, opt in critics:
            q, acts = forward(net, x, cache=True)
            err = q[:, 0] - y
            if td is None:
                td = err
            g, _ = gradient(net, x, (2.0 / n * weights * err)[:, None], acts)
            adam_step(net, g, opt)
        self.critic_updates += 1
        return np.abs(td)

    def bc_loss(self, demo_obs, demo_act):
        """Q-filtered behavioural cloning loss, averaged over the demo batch.

        Returns ``(loss, dloss/daction, mask)`` where the gradient is taken w.r.t. the actor
        output on ``demo_obs``.
        """
        pi = forward(self.actor, demo_obs)
        mask = self.q1(demo_obs, demo_act) > self.q1(demo_obs, pi)
        diff = (pi - demo_act) * mask[:, None]
        n = len(demo_obs)
        loss = float((diff**2).sum() / n)
        return loss, 2.0 / n * diff, mask

    def actor_gradient(self, obs, demo=None) -> np.ndarray:
        """Flat gradient of ``-mean Q1(s, pi(s)) + bc_weight * L_BC``."""
        pi, acts = forward(self.actor, obs, cache=True)
        x = np.concatenate([obs, pi], axis=1)
        n = len(obs)
        _, dq_dx = gradient(self.critic1, x, np.full((n, 1), -1.0 / n))
        grad, _ = gradient(self.actor, obs, dq_dx[:, self.obs_dim :], acts)
        if demo is not None and self.cfg.bc_weight > 0:
            demo_obs, demo_act = demo
            _, dl_da, mask = self.bc_loss(demo_obs, demo_act)
            if mask.any():
                g_bc, _ = gradient(self.actor, demo_obs, self.cfg.bc_weight * dl_da)
                grad = grad + g_bc
        return grad

    def actor_update(self, obs, demo=None) -> None:
        adam_step(self.actor, self.actor_gradient(obs, demo), self.actor_opt)
        d = self.cfg.tau_decay
        polyak_update(self.actor_target, self.actor, d)
        polyak_update(self.critic1_target, self.critic1, d)
        polyak_update(self.critic2_target, self.critic2, d)
        self.actor_updates += 1

    def train_step(self, buffer, rng, demos=None) -> None:
        """Critic step on a prioritized batch; actor and targets every ``policy_delay`` steps.

        ``demos`` is a top-K buffer or None when self-imitation is inactive.
        """
        batch, w, idx = buffer.sample(self.cfg.batch_size, rng)
        td = self.critic_update(batch, w, rng)
        buffer.update_priorities(idx, td)
        if self.critic_updates % self.cfg.policy_delay == 0:
            demo = demos.sample(self.cfg.batch_size, rng) if demos is not None else None
            self.actor_update(batch.obs, demo)

    # persistence

    def state_dict(self) -> dict:
        out = {}
        for name in ("actor", "critic1", "critic2", "actor_target", "critic1_target", "critic2_target"):
            out.update(state_dict(getattr(self, name), f"agent/{name}"))
        for name in ("actor_opt", "critic1_opt", "critic2_opt"):
            out.update(adam_state_dict(getattr(self, name), f"agent/{name}"))
        out["agent/counters"] = np.array([self.critic_updates, self.actor_updates, self.obs_dim, self.act_dim])
        return out

    @classmethod
    def from_state_dict(cls, d, cfg: TD3Config) -> "TD3Agent":
        critic_updates, actor_updates, obs_dim, act_dim = (int(v) for v in d["agent/counters"])
        agent = cls.__new__(cls)
        agent.cfg = cfg
        agent.obs_dim, agent.act_dim = obs_dim, act_dim
        for name in ("actor", "critic1", "critic2", "actor_target", "critic1_target", "critic2_target"):
            setattr(agent, name, from_state_dict(d, f"agent/{name}"))
        for name in ("actor_opt", "critic1_opt", "critic2_opt"):
            setattr(agent, name, adam_from_state_dict(d, f"agent/{name}"))
        agent.critic_updates, agent.actor_updates = critic_updates, actor_updates
        return agent


def config_to_dict(cfg: TD3Config) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    return d
