import numpy as np
import pytest

from reftraj.agent import TD3Agent, TD3Config
from reftraj.nnet import forward
from reftraj.replay import Batch, EpisodeRecord, PrioritizedReplayBuffer, TopKBuffer


def make_agent(seed=0, **kw):
    return TD3Agent(4, 2, TD3Config(hidden=(16, 8), **kw), np.random.default_rng(seed))


def random_batch(rng, n=10, done=None):
    return Batch(rng.normal(size=(n, 4)), rng.uniform(-1, 1, (n, 2)), rng.normal(size=n), rng.normal(size=(n, 4)),
                 np.zeros(n) if done is None else done)


def test_select_action_in_bounds():
    agent = make_agent()
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = agent.select_action(rng.normal(scale=10, size=4), True, rng)
        assert a.shape == (2,) and np.all(np.abs(a) <= 1.0)


def test_greedy_action_is_actor_output():
    agent = make_agent()
    obs = np.ones(4)
    assert np.array_equal(agent.select_action(obs), forward(agent.actor, obs))


def test_target_without_noise_matches_formula():
    agent = make_agent(target_noise=0.0)
    rng = np.random.default_rng(1)
    b = random_batch(rng, done=np.array([0, 1] * 5, dtype=float))
    y = agent.compute_target(b, rng)
    a2 = forward(agent.actor_target, b.next_obs)
    x = np.concatenate([b.next_obs, a2], 1)
    q = np.minimum(forward(agent.critic1_target, x)[:, 0], forward(agent.critic2_target, x)[:, 0])
    assert np.allclose(y, b.rew + 0.9 * (1 - b.done) * q)
    assert np.allclose(y[1::2], b.rew[1::2])


def test_target_noise_is_clipped():
    agent = make_agent(target_noise=100.0, noise_clip=0.0)
    rng = np.random.default_rng(2)
    b = random_batch(rng)
    assert np.allclose(agent.compute_target(b, rng), make_agent(target_noise=0.0).compute_target(b, rng))


def test_single_critic_target():
    agent = make_agent(target_noise=0.0, twin=False)
    rng = np.random.default_rng(3)
    b = random_batch(rng)
    x = np.concatenate([b.next_obs, forward(agent.actor_target, b.next_obs)], 1)
    assert np.allclose(agent.compute_target(b, rng), b.rew + 0.9 * forward(agent.critic1_target, x)[:, 0])


def test_critic_update_reduces_weighted_loss():
    agent = make_agent(target_noise=0.0)
    rng = np.random.default_rng(4)
    b = random_batch(rng, 50)
    w = np.ones(50)
    y = agent.compute_target(b, rng)
    before = np.mean((agent.q1(b.obs, b.act) - y) ** 2)
    for _ in range(20):
        td = agent.critic_update(b, w, rng)
    after = np.mean((agent.q1(b.obs, b.act) - agent.compute_target(b, rng)) ** 2)
    assert after < before
    assert td.shape == (50,) and np.all(td >= 0)


def test_zero_weight_samples_do_not_move_critic():
    agent = make_agent()
    rng = np.random.default_rng(5)
    before = agent.critic1.params.copy()
    agent.critic_update(random_batch(rng), np.zeros(10), rng)
    assert np.array_equal(agent.critic1.params, before)


def test_bc_loss_mask_and_value():
    agent = make_agent()
    rng = np.random.default_rng(6)
    obs = rng.normal(size=(8, 4))
    act = rng.uniform(-1, 1, (8, 2))
    loss, grad, mask = agent.bc_loss(obs, act)
    pi = forward(agent.actor, obs)
    expected_mask = agent.q1(obs, act) > agent.q1(obs, pi)
    assert np.array_equal(mask, expected_mask)
    assert np.isclose(loss, ((pi - act) ** 2 * mask[:, None]).sum() / 8)
    assert np.all(grad[~mask] == 0)


def test_bc_gradient_matches_finite_difference():
    agent = make_agent()
    rng = np.random.default_rng(7)
    obs = rng.normal(size=(5, 4))
    # demos that Q1 strongly prefers so the filter is open
    act = np.sign(rng.normal(size=(5, 2)))
    base = agent.actor_gradient(obs, None)
    full = agent.actor_gradient(obs, (obs, act))
    g_bc = full - base
    _, _, mask = agent.bc_loss(obs, act)
    assert mask.any()
    eps = 1e-6
    idx = rng.choice(agent.actor.n_params, 30, replace=False)
    for i in idx:
        old = agent.actor.params[i]
        agent.actor.params[i] = old + eps
        lp = ((forward(agent.actor, obs) - act) ** 2 * mask[:, None]).sum() / 5
        agent.actor.params[i] = old - eps
        lm = ((forward(agent.actor, obs) - act) ** 2 * mask[:, None]).sum() / 5
        agent.actor.params[i] = old
        assert np.isclose(g_bc[i], (lp - lm) / (2 * eps), rtol=1e-4, atol=1e-8)


def test_actor_gradient_ascends_q():
    agent = make_agent()
    rng = np.random.default_rng(8)
    obs = rng.normal(size=(64, 4))
    before = agent.q1(obs, forward(agent.actor, obs)).mean()
    for _ in range(30):
        agent.actor.params -= 1e-3 * agent.actor_gradient(obs)
    assert agent.q1(obs, forward(agent.actor, obs)).mean() > before


def test_closed_q_filter_gives_plain_td3_update():
    rng = np.random.default_rng(9)
    a, b = make_agent(1), make_agent(1)
    obs = rng.normal(size=(10, 4))
    demo_obs = rng.normal(size=(10, 4))
    # demo actions equal to the policy: Q1(s, a_demo) > Q1(s, pi(s)) is false everywhere
    demo_act = forward(a.actor, demo_obs)
    assert not a.bc_loss(demo_obs, demo_act)[2].any()
    a.actor_update(obs, (demo_obs, demo_act))
    b.actor_update(obs, None)
    assert np.array_equal(a.actor.params, b.actor.params)
    assert np.array_equal(a.actor_target.params, b.actor_target.params)


def test_policy_delay_and_polyak():
    agent = make_agent(policy_delay=2)
    rng = np.random.default_rng(10)
    buf = PrioritizedReplayBuffer(4, 2, 200)
    for _ in range(200):
        buf.add(rng.normal(size=4), rng.uniform(-1, 1, 2), rng.normal(), rng.normal(size=4), 0.0)
    actor0 = agent.actor.params.copy()
    target0 = agent.actor_target.params.copy()
    agent.train_step(buf, rng)
    assert agent.critic_updates == 1 and agent.actor_updates == 0
    assert np.array_equal(agent.actor.params, actor0)
    agent.train_step(buf, rng)
    assert agent.actor_updates == 1
    assert np.allclose(agent.actor_target.params, 0.995 * target0 + 0.005 * agent.actor.params)


def test_train_step_with_demos_runs():
    agent = make_agent()
    rng = np.random.default_rng(11)
    buf = PrioritizedReplayBuffer(4, 2, 200)
    for _ in range(120):
        buf.add(rng.normal(size=4), rng.uniform(-1, 1, 2), rng.normal(), rng.normal(size=4), 0.0)
    topk = TopKBuffer(2)
    topk.offer(EpisodeRecord(rng.normal(size=(5, 4)), rng.uniform(-1, 1, (5, 2)), np.ones(5), rng.normal(size=(5, 4)),
                             np.zeros(5), True, False))
    for _ in range(4):
        agent.train_step(buf, rng, topk)
    assert np.all(np.isfinite(agent.actor.params))


def test_state_roundtrip():
    agent = make_agent()
    rng = np.random.default_rng(12)
    buf = PrioritizedReplayBuffer(4, 2, 200)
    for _ in range(150):
        buf.add(rng.normal(size=4), rng.uniform(-1, 1, 2), rng.normal(), rng.normal(size=4), 0.0)
    for _ in range(3):
        agent.train_step(buf, rng)
    other = TD3Agent.from_state_dict(agent.state_dict(), agent.cfg)
    for name in ("actor", "critic1", "critic2", "actor_target", "critic1_target", "critic2_target"):
        assert np.array_equal(getattr(agent, name).params, getattr(other, name).params)
    assert other.actor_opt.step == agent.actor_opt.step
    r1, r2 = np.random.default_rng(0), np.random.default_rng(0)
    b1, b2 = PrioritizedReplayBuffer.from_state_dict(buf.state_dict()), PrioritizedReplayBuffer.from_state_dict(buf.state_dict())
    agent.train_step(b1, r1)
    other.train_step(b2, r2)
    assert np.array_equal(agent.actor.params, other.actor.params)


def test_config_validation():
    with pytest.raises(ValueError):
        TD3Config(gamma=1.5)
    with pytest.raises(ValueError):
        TD3Config(policy_delay=0)
