import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dekgci import graph as G
from dekgci import user_tower as UT

from .oracles import dense_propagation, random_graph

I2 = np.eye(2)


def one_edge(du=1, dv=1):
    edges = [(0, 0)] + [(0, k) for k in range(1, du)] + [(k, 0) for k in range(1, dv)]
    return G.build_interaction_graph(np.array([(u, v, 1) for u, v in edges]), dv, du)


def params_for(layers, d, rng, variant):
    p = {f"w1.{l}": rng.normal(size=(d, d)) for l in range(1, layers + 1)}
    if variant == "ngcf":
        p.update({f"ngcf_w2.{l}": rng.normal(size=(d, d)) for l in range(1, layers + 1)})
    return p


@pytest.mark.parametrize("w1,ev,du,expected", [
    (I2, [1, -1], 1, [1, -1]),
    (I2, [2, 0], 4, [1, 0]),
    (np.array([[0, 1], [1, 0]]), [3, 5], 1, [5, 3]),
])
def test_message(w1, ev, du, expected):
    g = one_edge(du=du)
    items = np.zeros((du, 2))
    items[0] = ev
    assert np.allclose(UT.message(0, 0, g, w1, items), expected)


def test_message_dimension_mismatch():
    with pytest.raises(ValueError):
        UT.message(0, 0, one_edge(), np.eye(3), np.ones((1, 2)))


def test_layer_single_edge():
    g = one_edge()
    u1, i1 = UT.propagate_layer(g.norm_adj(), np.zeros((1, 2)), np.array([[1.0, -1.0]]), I2, 0.2)
    assert np.allclose(u1.data, [[1, -0.2]])


def test_layer_isolated_user_is_zero():
    g = G.build_interaction_graph(np.array([[0, 0, 1]]), 2, 1)
    u1, _ = UT.propagate_layer(g.norm_adj(), np.ones((2, 2)), np.ones((1, 2)), I2, 0.2)
    assert np.array_equal(u1.data[1], [0, 0])


def test_symmetric_users_identical():
    g = G.build_interaction_graph(np.array([[0, 0, 1], [0, 1, 1], [1, 0, 1], [1, 1, 1]]), 2, 2)
    rng = np.random.default_rng(0)
    user0 = np.tile(rng.normal(size=(1, 3)), (2, 1))
    cfg = UT.PropagationConfig(layers=3, dim=3)
    users, _ = UT.propagate(g.norm_adj(), user0, rng.normal(size=(2, 3)),
                            params_for(3, 3, rng, "dekgci"), cfg)
    for t in users:
        assert np.array_equal(t.data[0], t.data[1])


@pytest.mark.parametrize("agg,expected", [("sum", [2, 2]), ("concat", [1, 0, 0, 1, 1, 1]),
                                          ("neighbor", [0, 1, 1, 1])])
def test_aggregate(agg, expected):
    tables = [np.array([[1.0, 0]]), np.array([[0.0, 1]]), np.array([[1.0, 1]])]
    assert UT.aggregate_user(tables, agg).data.tolist() == [expected]


def test_aggregate_unknown():
    with pytest.raises(ValueError):
        UT.aggregate_user([np.zeros((1, 2))], "max")
    with pytest.raises(ValueError):
        UT.aggregate_user([np.zeros((1, 2))], "neighbor")
    with pytest.raises(ValueError):
        UT.PropagationConfig(aggregator="max")


def test_ngcf_isolated_keeps_self_term():
    g = G.build_interaction_graph(np.array([[0, 0, 1]]), 2, 1)
    w1 = np.array([[1.0, 2.0], [0.0, -1.0]])
    own = np.array([[0.0, 0.0], [1.0, 1.0]])
    u1, _ = UT.propagate_ngcf_layer(g.norm_adj(), own, np.ones((1, 2)), w1, I2, 0.2)
    assert np.allclose(u1.data[1], [3.0, -0.2])


def test_ngcf_hand_example():
    g = one_edge()
    u1, _ = UT.propagate_ngcf_layer(g.norm_adj(), np.array([[1.0, 1]]), np.array([[2.0, 3]]),
                                    I2, I2, 0.2)
    assert np.allclose(u1.data, [[5, 7]])


def test_lightgcn_examples():
    g = one_edge()
    u1, _ = UT.propagate_lightgcn_layer(g.norm_adj(), np.zeros((1, 2)), np.array([[1.0, -1]]))
    assert np.allclose(u1.data, [[1, -1]])
    g = G.build_interaction_graph(np.array([[0, 0, 1], [0, 1, 1]]), 2, 2)
    u1, _ = UT.propagate_lightgcn_layer(g.norm_adj(), np.zeros((2, 2)), np.array([[1.0, 0], [1, 0]]))
    assert np.allclose(u1.data, [[np.sqrt(2), 0], [0, 0]])


@pytest.mark.parametrize("variant", ["dekgci", "ngcf", "lightgcn"])
def test_dense_oracle(variant):
    rng = np.random.default_rng(11)
    for _ in range(20):
        m, n, d, L = rng.integers(1, 6), rng.integers(1, 6), 3, 3
        edges = random_graph(rng, m, n)
        g = G.build_interaction_graph(np.array([(u, v, 1) for u, v in edges]).reshape(-1, 3), m, n)
        p = params_for(L, d, rng, variant)
        u0, i0 = rng.normal(size=(m, d)), rng.normal(size=(n, d))
        cfg = UT.PropagationConfig(layers=L, dim=d, variant=variant)
        users, items = UT.propagate(g.norm_adj(), u0, i0, p, cfg)
        ref_u, ref_i = dense_propagation(edges, m, n, u0, i0,
                                         [p[f"w1.{l}"] for l in range(1, L + 1)],
                                         [p.get(f"ngcf_w2.{l}") for l in range(1, L + 1)],
                                         variant, 0.2)
        for a, b in zip(users + items, ref_u + ref_i):
            assert np.abs(a.data - b).max() <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["dekgci", "ngcf", "lightgcn"]))
def test_permutation_equivariance(seed, variant):
    rng = np.random.default_rng(seed)
    edges = random_graph(rng, 5, 5)
    pu, pi = rng.permutation(5), rng.permutation(5)
    d = 3
    u0, i0 = rng.normal(size=(5, d)), rng.normal(size=(5, d))
    p = params_for(2, d, rng, variant)
    cfg = UT.PropagationConfig(layers=2, dim=d, variant=variant)

    def run(es, uu, ii):
        arr = np.array([(u, v, 1) for u, v in es]).reshape(-1, 3)
        g = G.build_interaction_graph(arr, 5, 5)
        return UT.propagate(g.norm_adj(), uu, ii, p, cfg)

    users, items = run(edges, u0, i0)
    # node u is relabelled pu[u]
    inv_u, inv_i = np.argsort(pu), np.argsort(pi)
    users2, items2 = run([(pu[u], pi[v]) for u, v in edges], u0[inv_u], i0[inv_i])
    for a, b in zip(users, users2):
        assert np.allclose(a.data[inv_u], b.data, atol=1e-12)
    for a, b in zip(items, items2):
        assert np.allclose(a.data[inv_i], b.data, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_identity_slope_one_matches_lightgcn(seed):
    rng = np.random.default_rng(seed)
    m, n, d, L = 6, 7, 4, 3
    edges = random_graph(rng, m, n)
    g = G.build_interaction_graph(np.array([(u, v, 1) for u, v in edges]).reshape(-1, 3), m, n)
    u0, i0 = rng.normal(size=(m, d)), rng.normal(size=(n, d))
    p = {f"w1.{l}": np.eye(d) for l in range(1, L + 1)}
    a = UT.propagate(g.norm_adj(), u0, i0, p, UT.PropagationConfig(L, d, leaky_slope=1.0))
    b = UT.propagate(g.norm_adj(), u0, i0, {}, UT.PropagationConfig(L, d, variant="lightgcn"))
    for x, y in zip(a[0] + a[1], b[0] + b[1]):
        assert np.abs(x.data - y.data).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_normalization_bound(seed):
    rng = np.random.default_rng(seed)
    m, n, d = 6, 6, 3
    edges = random_graph(rng, m, n, p=0.6)
    g = G.build_interaction_graph(np.array([(u, v, 1) for u, v in edges]).reshape(-1, 3), m, n)
    u0, i0 = rng.normal(size=(m, d)), rng.normal(size=(n, d))
    p = params_for(3, d, rng, "dekgci")
    users, items = UT.propagate(g.norm_adj(), u0, i0, p, UT.PropagationConfig(3, d))
    max_deg = max(g.user_degree.max(initial=0), g.item_degree.max(initial=0))
    for l in range(1, 4):
        msg = np.abs(items[l - 1].data @ p[f"w1.{l}"].T).max()
        assert np.abs(users[l].data).max() <= msg * np.sqrt(max_deg) + 1e-12


@pytest.mark.parametrize("agg,width", [("sum", 4), ("concat", 16), ("neighbor", 12)])
def test_aggregator_dimensions(agg, width):
    assert UT.final_dim(4, 3, agg) == width
    cfg = UT.PropagationConfig(3, 4, agg)
    assert cfg.final_dim == width
    tables = [np.zeros((2, 4))] * 4
    assert UT.aggregate_user(tables, agg).shape == (2, width)


@pytest.mark.parametrize("variant", ["dekgci", "ngcf", "lightgcn"])
def test_batch_propagation_matches_full(variant):
    rng = np.random.default_rng(5)
    m, n, d, L = 30, 25, 4, 3
    edges = random_graph(rng, m, n, p=0.08)
    g = G.build_interaction_graph(np.array([(u, v, 1) for u, v in edges]).reshape(-1, 3), m, n)
    adj = g.norm_adj()
    u0, i0 = rng.normal(size=(m, d)), rng.normal(size=(n + 5, d))
    rows = rng.permutation(n + 5)[:n]
    p = params_for(L, d, rng, variant)
    cfg = UT.PropagationConfig(L, d, variant=variant)
    users, _ = UT.propagate(adj, u0, i0[rows], p, cfg)
    batch = np.array([3, 7, 7, 0, 29])
    part = UT.propagate_batch(g, adj, batch, u0, i0, p, cfg, item_rows=rows)
    for full, b in zip(users, part):
        assert np.abs(full.data[batch] - b.data).max() <= 1e-12
