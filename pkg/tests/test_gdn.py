import numpy as np
import pytest

from gdnlab import gdn, orbits
from gdnlab import graph as G
from gdnlab.gdn import AugmentationConfig, Augmenter, GdnError, LayerSpec, GdnModel

STYLES = list(gdn.LAYER_KINDS) + list(gdn.PRESETS)


def small_model(style, obs_dim, rng, **kw):
    kw.setdefault("hidden", 8)
    kw.setdefault("passes", 2)
    return gdn.build_model(style, obs_dim, 3, rng, **kw)


def test_mean_layer_hand_example():
    one = np.ones((1, 1))
    layer = LayerSpec("mean-agg", 1, 1, dict(W_self=one, W_agg=one, b=np.zeros(1)), activation="identity")
    model = GdnModel([layer], dict(W=one, b=np.zeros(1)))
    out, hid = gdn.forward(model, G.complete(2), [[1.0], [2.0]])
    np.testing.assert_allclose(out[:, 0], [3.0, 3.0])
    assert hid is None


def test_sum_vs_mean_aggregation():
    one = np.ones((1, 1))
    def model(kind):
        layer = LayerSpec(kind, 1, 1, dict(W_self=0 * one, W_agg=one, b=np.zeros(1)), activation="identity")
        return GdnModel([layer], dict(W=one, b=np.zeros(1)))
    star = G.build_graph(4, [(k, 0) for k in range(1, 4)])
    obs = [[0.0], [1.0], [2.0], [3.0]]
    assert gdn.forward(model("sum-agg"), star, obs)[0][0, 0] == pytest.approx(6.0)
    assert gdn.forward(model("mean-agg"), star, obs)[0][0, 0] == pytest.approx(2.0)
    # isolated receivers aggregate a zero vector
    assert gdn.forward(model("mean-agg"), star, obs)[0][1, 0] == 0.0


@pytest.mark.parametrize("style", STYLES)
def test_edgeless_graph_outputs_depend_only_on_own_obs(style, rng):
    model = small_model(style, 3, rng)
    obs = rng.normal(size=(4, 3))
    out, _ = gdn.forward(model, G.empty(4), obs)
    for i in range(4):
        alone, _ = gdn.forward(model, G.empty(1), obs[i:i + 1])
        np.testing.assert_allclose(out[i], alone[0], atol=1e-12)


@pytest.mark.parametrize("style", STYLES)
def test_cycle_with_equal_obs_gives_equal_outputs(style, rng):
    model = small_model(style, 2, rng)
    out, _ = gdn.forward(model, G.cycle(4), np.tile([0.3, -0.7], (4, 1)))
    assert np.ptp(out, axis=0).max() <= 1e-6


@pytest.mark.parametrize("style", STYLES)
def test_equivariance(style, rng):
    for _ in range(200):
        n = int(rng.integers(1, 7))
        model = small_model(style, 3, rng, readout=bool(rng.random() < 0.3))
        g = G.random_graph(n, 0.5, rng, directed=bool(rng.random() < 0.5))
        obs = rng.normal(size=(n, 3))
        sigma = G.NodePermutation.random(n, rng)
        assert gdn.equivariance_check(model, g, obs, sigma) <= 1e-6
        assert gdn.equivariance_check(model, g, obs, G.NodePermutation.identity(n)) == 0.0


def test_recurrent_equivariance_and_hidden_flow(rng):
    model = small_model("commnet", 3, rng, recurrent=True)
    g = G.cycle(5)
    obs = rng.normal(size=(5, 3))
    h0 = gdn.initial_hidden(model, 5)
    assert h0.shape == (5, 8) and not h0.any()
    out, h1 = gdn.forward(model, g, obs, h0)
    assert h1.shape == (5, 8) and np.abs(h1).sum() > 0
    out2, _ = gdn.forward(model, g, obs, h1)
    assert not np.allclose(out, out2)
    sigma = G.NodePermutation.random(5, rng)
    assert gdn.equivariance_check(model, g, obs, sigma, hidden=rng.normal(size=(5, 8))) <= 1e-6


def orbit_obs(part, rng, d):
    per_orbit = rng.normal(size=(len(part.orbits), d))
    return per_orbit[part.orbit_of]


@pytest.mark.parametrize("style", list(gdn.LAYER_KINDS))
def test_similar_nodes_with_equal_obs_agree(style, rng):
    trials = 0
    while trials < 100:
        n = int(rng.integers(2, 8))
        g = G.random_graph(n, float(rng.uniform(0.2, 0.6)), rng)
        part = orbits.orbit_partition(g)
        if len(part.orbits) == n:
            continue
        trials += 1
        model = small_model(style, 2, rng, passes=int(rng.integers(1, 4)))
        out, _ = gdn.forward(model, g, orbit_obs(part, rng, 2))
        for o in part.orbits:
            members = sorted(o)
            assert np.abs(out[members] - out[members[0]]).max() <= 1e-6


def test_neighbour_storage_order_is_irrelevant(rng):
    n = 6
    g = G.random_graph(n, 0.6, rng, directed=True)
    edges = sorted(g.edges)
    obs = rng.normal(size=(n, 4))
    for style in STYLES:
        model = small_model(style, 4, rng)
        ref, _ = gdn.forward(model, g, obs)
        for _ in range(5):
            shuffled = [edges[k] for k in rng.permutation(len(edges))]
            out, _ = gdn.forward(model, G.build_graph(n, shuffled), obs)
            np.testing.assert_array_equal(out, ref)
        # an explicit sender mask is the same graph
        np.testing.assert_array_equal(gdn.forward(model, g.adjacency(), obs)[0], ref)


def test_batched_forward_matches_single(rng):
    model = small_model("tarmac", 3, rng)
    masks = rng.random((4, 5, 5)) < 0.5
    for m in masks:
        np.fill_diagonal(m, False)
    obs = rng.normal(size=(4, 5, 3))
    batch, _ = gdn.forward(model, masks, obs)
    for b in range(4):
        np.testing.assert_allclose(batch[b], gdn.forward(model, masks[b], obs[b])[0], atol=1e-12)


def test_shared_actor_head_and_value_head(rng):
    model = small_model("commnet", 3, rng)
    names = model.parameters()
    assert names["actor.W"].shape == (8, 3)
    assert not any(k.startswith("actor.") and k not in ("actor.W", "actor.b") for k in names)
    out, vals, _ = gdn.evaluate(model, G.cycle(3), rng.normal(size=(3, 3)))
    assert out.shape == (3, 3) and vals.shape == (3,)
    assert gdn.build_model("dgn-style", 3, 3, rng, hidden=8, passes=1).value_head is None


def test_forward_is_deterministic(rng):
    model = small_model("ic3net", 3, rng)
    obs = rng.normal(size=(4, 3))
    a, _ = gdn.forward(model, G.cycle(4), obs)
    b, _ = gdn.forward(model, G.cycle(4), obs)
    np.testing.assert_array_equal(a, b)


def test_dimension_errors(rng):
    model = small_model("commnet", 3, rng)
    with pytest.raises(GdnError):
        gdn.forward(model, G.cycle(4), np.zeros((4, 2)))
    with pytest.raises(GdnError):
        gdn.forward(model, G.cycle(3), np.zeros((4, 3)))
    with pytest.raises(GdnError):
        gdn.build_model("nope", 3, 3, rng)
    with pytest.raises(GdnError):
        LayerSpec("mean-agg", 2, 2, dict(W_self=np.zeros((2, 3)), W_agg=np.zeros((2, 2)), b=np.zeros(2)))
    with pytest.raises(GdnError):
        LayerSpec("pool", 1, 1, {})
    a = gdn.make_layer("mean-agg", 3, 4, rng)
    b = gdn.make_layer("mean-agg", 5, 4, rng)
    with pytest.raises(GdnError):
        GdnModel([a, b], dict(W=np.zeros((4, 2)), b=np.zeros(2)))


def test_attention_head_shapes(rng):
    layer = gdn.make_layer("attention", 6, 10, rng, heads=4)
    assert layer.agg_params["Wq3"].shape == (6, gdn.KEY_DIM)
    assert layer.agg_params["Wv0"].shape == (6, gdn.VALUE_DIM)
    assert layer.update_params["W_agg"].shape == (4 * gdn.VALUE_DIM, 10)


def test_checkpoint_round_trip(tmp_path, rng):
    for style, kw in (("tarmac", dict(readout=True)), ("commnet", dict(recurrent=True)),
                      ("t-ic3net", {}), ("dgn-style", {})):
        model = small_model(style, 3, rng, **kw)
        path = tmp_path / f"{style}.npz"
        gdn.save_model(model, path)
        back = gdn.load_model(path)
        assert back.config() == model.config()
        a, b = model.parameters(), back.parameters()
        assert a.keys() == b.keys()
        for k in a:
            assert a[k].tobytes() == b[k].tobytes()
        obs = rng.normal(size=(4, 3))
        h = gdn.initial_hidden(model, 4)
        np.testing.assert_array_equal(gdn.forward(model, G.cycle(4), obs, h)[0],
                                      gdn.forward(back, G.cycle(4), obs, h)[0])


# -- augmentation --


def test_augment_none_and_unique_id(rng):
    obs = np.array([[0.5], [0.5]])
    np.testing.assert_array_equal(gdn.augment(obs, AugmentationConfig("none"), rng), obs)
    uid = gdn.augment(obs, AugmentationConfig("unique-id", max_agents=2), rng)
    np.testing.assert_array_equal(uid, [[0.5, 1, 0], [0.5, 0, 1]])
    with pytest.raises(GdnError):
        gdn.augment(np.zeros((3, 1)), AugmentationConfig("unique-id", max_agents=2), rng)


def test_augment_rni_width_and_range(rng):
    out = gdn.augment(np.zeros((4, 3)), AugmentationConfig("rni", 0.25), rng)
    assert out.shape == (4, 4)
    assert np.all(np.abs(out[:, 3]) <= 1.0)
    assert gdn.rni_width(3, 0.75) == 9
    assert gdn.augmented_dim(12, AugmentationConfig("rni", 0.25)) == 16
    with pytest.raises(GdnError):
        AugmentationConfig("rni", 1.0)
    with pytest.raises(GdnError):
        AugmentationConfig("dropout")


def test_augment_noise_fraction_matches_ratio():
    for d in (3, 6, 9, 12):
        for r in (0.25, 0.5, 0.75):
            k = gdn.rni_width(d, r)
            assert k / (d + k) == pytest.approx(r, abs=0.5 / (d + k))


def test_augment_is_seed_deterministic_and_fresh_per_call():
    cfg = AugmentationConfig("rni", 0.5)
    a = gdn.augment(np.zeros((3, 2)), cfg, np.random.default_rng(7))
    b = gdn.augment(np.zeros((3, 2)), cfg, np.random.default_rng(7))
    assert a.tobytes() == b.tobytes()
    aug = Augmenter(cfg, np.random.default_rng(7))
    assert not np.array_equal(aug(np.zeros((3, 2))), aug(np.zeros((3, 2))))


def test_persistent_noise_holds_for_an_episode():
    aug = Augmenter(AugmentationConfig("rni", 0.5, persistent=True), np.random.default_rng(1))
    x, y = aug(np.zeros((3, 2))), aug(np.ones((3, 2)))
    np.testing.assert_array_equal(x[:, 2:], y[:, 2:])
    aug.reset()
    assert not np.array_equal(aug(np.zeros((3, 2)))[:, 2:], x[:, 2:])


def test_rni_breaks_orbit_ties(rng):
    model = small_model("commnet", 2, rng)
    obs = gdn.augment(np.zeros((4, 1)), AugmentationConfig("rni", 0.5), rng)
    out, _ = gdn.forward(model, G.cycle(4), obs)
    assert np.ptp(out, axis=0).max() > 1e-6
