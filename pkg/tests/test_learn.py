import numpy as np
import pytest

from gdnlab import envs, gdn, learn
from gdnlab.autodiff import AutodiffError, Tensor
from gdnlab.gdn import GdnModel
from gdnlab.learn import (
    EpisodeBatch,
    Experience,
    ParamStore,
    ReplayBuffer,
    TrainConfig,
    a2c_loss,
    a2c_update,
)


def tiny_model(kind, rng, obs_dim=3, hid=5, actions=3, recurrent=False):
    """Two layers with narrow attention projections, well under 1000 parameters."""
    opts = dict(key_dim=4, value_dim=4, heads=2 if kind == "attention" else 1)
    d0 = hid if recurrent else obs_dim
    layers = [gdn.make_layer(kind, d0, hid, rng, readout=True, **opts),
              gdn.make_layer(kind, hid, hid, rng, **opts)]
    head = dict(W=rng.uniform(-1, 1, (hid, actions)), b=rng.uniform(-1, 1, actions))
    value = dict(W=rng.uniform(-1, 1, (hid, 1)), b=rng.uniform(-1, 1, 1))
    rnn = gdn.make_gru(obs_dim, hid, rng) if recurrent else None
    return GdnModel(layers, head, value, rnn, hid if recurrent else None, kind)


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def gradient_check(model, rng, h=1e-5):
    n = 4
    inbox = rng.random((2, n, n)) < 0.6
    for m in inbox:
        np.fill_diagonal(m, False)
    obs = rng.normal(size=(2, n, model.obs_dim))
    hidden = rng.normal(size=(2, n, model.hidden_dim)) if model.recurrent else None
    wo = rng.normal(size=(2, n, model.num_outputs))
    wv = rng.normal(size=(2, n, 1))

    def loss_of(params):
        res = gdn.forward_tensors(model, inbox, obs, hidden, params=params)
        out = (res.outputs * Tensor(wo)).sum() + (res.values * Tensor(wv)).sum()
        return out + (res.outputs * res.outputs).mean()

    store = ParamStore(model)
    store.zero_grad()
    store.backward(loss_of(store.leaves()))
    worst = 0.0
    for name, p in store.params.items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            hi = float(loss_of({}).data)
            p[idx] = old - h
            lo = float(loss_of({}).data)
            p[idx] = old
            num[idx] = (hi - lo) / (2 * h)
        worst = max(worst, relative_error(store.grads[name], num))
    return worst


def test_backward_examples():
    model = tiny_model("mean-agg", np.random.default_rng(0))
    store = ParamStore(model)
    leaves = store.leaves()
    total = None
    for t in leaves.values():
        total = t.sum() if total is None else total + t.sum()
    grads = learn.backward(store, total)
    assert all((g == 1.0).all() for g in grads.values())
    w = Tensor(np.array([0.7]), requires_grad=True)
    (Tensor(np.array([0.0])) * w).tanh().sum().backward()
    assert w.grad[0] == 0.0
    with pytest.raises(AutodiffError):
        ParamStore(model).backward(Tensor(np.array(1.0)))


@pytest.mark.parametrize("kind", gdn.LAYER_KINDS)
def test_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(gdn.LAYER_KINDS.index(kind))
    for _ in range(3):
        model = tiny_model(kind, rng)
        assert model.num_parameters() <= 1000
        assert gradient_check(model, rng) < 1e-4


def test_recurrent_gradients_match_finite_differences(rng):
    model = tiny_model("gated-mean", rng, recurrent=True)
    assert gradient_check(model, rng) < 1e-4


def test_discounted_returns():
    np.testing.assert_allclose(learn.discounted_returns([1, 2, 3], 1.0), [6, 5, 3])
    np.testing.assert_allclose(learn.discounted_returns([1, 1, 1], 0.5), [1.75, 1.5, 1.0])
    cut = np.array([False, True, False])
    np.testing.assert_allclose(learn.discounted_returns([1, 2, 3], 1.0, cut=cut), [3, 2, 3])


def bandit_batch(model, rng, episodes=32):
    obs = np.ones((1, episodes, 1, 1))
    inbox = np.zeros((1, episodes, 1, 1), dtype=bool)
    out, _ = gdn.forward(model, inbox[0], obs[0])
    actions = learn.select_actions(out, "stochastic", rng)[None]
    rewards = (actions == 0).astype(np.float64)
    ones = np.ones((1, episodes, 1), dtype=bool)
    return EpisodeBatch(obs, inbox, actions, rewards, ones, ones.copy(), np.ones((1, episodes), dtype=bool), [])


def test_bandit_policy_prefers_the_paying_action():
    rng = np.random.default_rng(0)
    model = gdn.build_model("commnet", 1, 2, rng, hidden=8, passes=1)
    cfg = TrainConfig(lrate=0.05, optimizer="sgd")
    store = ParamStore(model)
    opt = learn.make_optimizer(store, cfg)
    for _ in range(200):
        a2c_update(model, bandit_batch(model, rng), cfg, opt, store)
    out, _ = gdn.forward(model, np.zeros((1, 1), dtype=bool), np.ones((1, 1)))
    assert learn.softmax(out)[0, 0] > 0.9


def test_zero_advantage_gives_zero_policy_loss(rng):
    model = gdn.build_model("commnet", 1, 2, rng, hidden=4, passes=1)
    batch = bandit_batch(model, rng, episodes=8)
    batch.rewards[...] = 2.5
    model.value_head["W"][...] = 0.0
    model.value_head["b"][...] = 2.5
    _, stats = a2c_loss(model, batch, TrainConfig(), {})
    assert stats["policy_loss"] == 0.0 and stats["value_loss"] == 0.0


def test_a2c_rejects_empty_batch(rng):
    model = gdn.build_model("commnet", 1, 2, rng, hidden=4, passes=1)
    batch = bandit_batch(model, rng, episodes=2)
    batch.valid[...] = False
    with pytest.raises(ValueError):
        a2c_loss(model, batch, TrainConfig(), {})


def test_a2c_is_reproducible_bit_for_bit():
    cfg_env = envs.default_config("traffic_junction")

    def run():
        rng = np.random.default_rng(11)
        model = gdn.build_model("commnet", envs.make_env(cfg_env).obs_dim, 2, rng, hidden=8, passes=2)
        cfg = TrainConfig()
        store = ParamStore(model)
        opt = learn.make_optimizer(store, cfg)
        for _ in range(3):
            batch = learn.collect(model, envs.make_env(cfg_env), 4, rng)
            a2c_update(model, batch, cfg, opt, store)
        return b"".join(v.tobytes() for v in model.parameters().values())

    assert run() == run()


def test_collect_shapes_and_padding(rng):
    env = envs.make_env(envs.default_config("predator_prey"))
    model = gdn.build_model("tarmac", env.obs_dim, env.num_actions, rng, hidden=8, passes=1)
    batch = learn.collect(model, env, 3, rng)
    t = batch.obs.shape[0]
    assert batch.obs.shape == (t, 3, 5, env.obs_dim)
    assert batch.num_steps == batch.valid.sum() <= 3 * 40
    assert (batch.rewards[~batch.valid] == 0).all()
    assert len(batch.metrics) == 3
    rand = learn.collect(None, env, 2, rng, mode="random")
    assert rand.actions.max() < env.num_actions


def test_select_action_modes():
    rng = np.random.default_rng(0)
    out = np.array([[0.0, 5.0, 1.0], [3.0, 0.0, 0.0]])
    assert learn.select_actions(out, "greedy", rng).tolist() == [1, 0]
    assert learn.select_actions(out, "epsilon", rng, epsilon=0.0).tolist() == [1, 0]
    picks = np.array([learn.select_actions(out, "epsilon", rng, epsilon=1.0) for _ in range(300)])
    assert set(picks[:, 0].tolist()) == {0, 1, 2}
    probs = np.array([[0.2, 0.8]])
    draws = np.array([learn.sample_categorical(probs, rng)[0] for _ in range(4000)])
    assert abs(draws.mean() - 0.8) < 0.03
    with pytest.raises(ValueError):
        learn.select_actions(out, "boltzmann", rng)


# -- value-based path --


def test_epsilon_schedule():
    cfg = TrainConfig()
    assert learn.epsilon(0, cfg) == 1.0
    assert learn.epsilon(45000, cfg) == 0.1
    assert learn.epsilon(10**6, cfg) == 0.1
    vals = [learn.epsilon(e, cfg) for e in range(0, 60000, 500)]
    assert vals == sorted(vals, reverse=True)
    assert min(vals) >= 0.1 and max(vals) <= 1.0
    with pytest.raises(ValueError):
        learn.epsilon(-1, cfg)


def test_td_targets():
    assert learn.td_targets([1.0], [2.0], [False], 1.0).tolist() == [3.0]
    assert learn.td_targets([[1.0, 1.0]], [[2.0, 4.0]], [True], 1.0).tolist() == [[1.0, 1.0]]
    assert learn.td_targets([1.0], [2.0], [False], 0.5).tolist() == [2.0]


def experience(rng, n=3, d=4, expert=False):
    comm = ~np.eye(n, dtype=bool)
    return Experience(rng.normal(size=(n, d)), rng.integers(0, 3, n), rng.normal(size=(n, d)),
                      rng.normal(size=n), comm, comm, False, expert)


def test_replay_buffer_ring_and_sampling():
    rng = np.random.default_rng(0)
    buf = ReplayBuffer(5)
    exps = [experience(rng) for _ in range(8)]
    for e in exps:
        buf.add(e)
    assert len(buf) == 5
    assert buf.items() == exps[3:]
    a = buf.sample(5, np.random.default_rng(1))
    b = buf.sample(5, np.random.default_rng(1))
    assert [id(x) for x in a] == [id(x) for x in b]
    assert len({id(x) for x in a}) == 5
    with pytest.raises(ValueError):
        buf.sample(6, rng)
    with pytest.raises(ValueError):
        Experience(np.zeros((2, 1)), np.zeros(3), np.zeros((3, 1)), np.zeros(3), np.zeros((3, 3)), np.zeros((3, 3)))


def test_q_regression_reaches_zero_loss_when_targets_match(rng):
    model = gdn.build_model("dgn-style", 4, 3, rng, hidden=8, passes=1)
    arrays = learn.stack_batch([experience(rng) for _ in range(6)])
    q, _ = gdn.forward(model, arrays["comm"], arrays["obs"])
    y = np.take_along_axis(q, arrays["actions"][..., None], axis=-1)[..., 0]
    store = ParamStore(model)
    assert learn.q_regression_step(model, arrays, y, learn.make_optimizer(store, TrainConfig()), TrainConfig()) == 0.0


def test_q_regression_drives_loss_down(rng):
    model = gdn.build_model("dgn-style", 4, 3, rng, hidden=16, passes=2)
    arrays = learn.stack_batch([experience(rng) for _ in range(16)])
    y = rng.normal(size=arrays["rewards"].shape)
    cfg = TrainConfig(optimizer="adam", lrate=0.01)
    store = ParamStore(model)
    opt = learn.make_optimizer(store, cfg)
    losses = [learn.q_regression_step(model, arrays, y, opt, cfg, store) for _ in range(100)]
    assert losses[-1] * 10 <= losses[0]


def test_dqn_update_skips_underfilled_buffer_and_syncs_target(rng):
    model = gdn.build_model("dgn-style", 4, 3, rng, hidden=8, passes=1)
    target = learn.target_network(model)
    cfg = TrainConfig(dgn_batch_size=8, train_steps=2)
    store = ParamStore(model)
    opt = learn.make_optimizer(store, cfg)
    buf = ReplayBuffer(100)
    for _ in range(7):
        buf.add(experience(rng))
    assert learn.dqn_update(model, buf, target, cfg, opt, rng, store) is None
    buf.add(experience(rng))
    loss = learn.dqn_update(model, buf, target, cfg, opt, rng, store)
    assert loss is not None and np.isfinite(loss)
    assert not np.array_equal(model.parameters()["actor.W"], target.parameters()["actor.W"])
    learn.sync_target(model, target)
    for k, v in model.parameters().items():
        np.testing.assert_array_equal(v, target.parameters()[k])


# -- imitation --


def test_interleaving_counts(rng):
    normal = (experience(rng) for _ in range(1500))
    expert = (experience(rng) for _ in range(10**4))
    buf = learn.imitation_interleave(ReplayBuffer(40000), expert, normal)
    assert buf.count(expert=False) == 1500 and buf.count(expert=True) == 300
    flags = [e.expert for e in buf.items()]
    assert flags[:500] == [False] * 500 and flags[500:600] == [True] * 100
    assert flags[600:1100] == [False] * 500


def test_interleaving_disabled_keeps_agent_data_only(rng):
    buf = learn.imitation_interleave(ReplayBuffer(1000), (experience(rng) for _ in range(50)),
                                     (experience(rng) for _ in range(600)), enabled=False)
    assert buf.count(expert=True) == 0 and len(buf) == 600


def test_interleaver_refuses_unowed_expert(rng):
    mix = learn.Interleaver(ReplayBuffer(10), num_normal=2, num_expert=1)
    with pytest.raises(RuntimeError):
        mix.add_expert(experience(rng))
    mix.add_agent(experience(rng))
    mix.add_agent(experience(rng))
    assert mix.wants_expert
    mix.add_expert(experience(rng))
    assert not mix.wants_expert and mix.buffer.count(expert=True) == 1


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lrate=0)
    with pytest.raises(ValueError):
        TrainConfig(epsilon_min=2.0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="lbfgs")


def test_optimisers_descend_a_quadratic():
    for name in learn.OPTIMIZERS:
        layer = gdn.make_layer("mean-agg", 1, 1, np.random.default_rng(0), activation="identity")
        model = GdnModel([layer], dict(W=np.ones((1, 1)), b=np.zeros(1)))
        store = ParamStore(model)
        opt = learn.OPTIMIZERS[name](store, 0.05)

        def loss():
            out = gdn.forward_tensors(model, np.ones((1, 2, 2), dtype=bool) & ~np.eye(2, dtype=bool),
                                      np.array([[[1.0], [2.0]]]), params=store.leaves()).outputs
            return ((out - 3.0) * (out - 3.0)).sum()

        first = None
        for _ in range(50):
            store.zero_grad()
            val = loss()
            first = first if first is not None else float(val.data)
            store.backward(val)
            opt.step()
        assert float(loss().data) < first
