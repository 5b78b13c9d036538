import numpy as np
import pytest

from gedlearn.assignment import init_gs_params
from gedlearn.autodiff import Tensor
from gedlearn.exact import EditCostConfig, cost_config
from gedlearn.graphs import make_graph, pad_pair, synth_random
from gedlearn.model import (SENTINEL, build_B_mask, build_C, build_D, build_M,
                            forward_learned, forward_unsupervised, init_model_params)
from gedlearn.encoder import encode

from oracles import permute_graph


def _cold_gs(frame_size=16, temp=0.02):
    gs = init_gs_params(frame_size=frame_size)
    gs.log_temp.data = np.array(np.log(temp))
    return gs


def test_b_mask_one_vs_one():
    b, mask = build_B_mask(1, 1, cost_config(1))
    assert np.array_equal(b, [[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(mask, np.zeros((2, 2)))


def test_b_mask_two_vs_one():
    b, mask = build_B_mask(2, 1, cost_config(2))  # node ops cost 2
    assert np.array_equal(b, [[0, 2, 2], [0, 2, 2], [2, 0, 0]])
    expected_mask = np.zeros((3, 3))
    expected_mask[0, 2] = SENTINEL  # node 0 may only die in its own column
    expected_mask[1, 1] = SENTINEL
    assert np.array_equal(mask, expected_mask)


def test_b_mask_blocks():
    n, m = 3, 2
    b, mask = build_B_mask(n, m, cost_config(4))  # del 1, ins 2
    assert np.array_equal(b[:n, :m], np.zeros((n, m)))   # substitutions are free here
    assert np.all(b[:n, m:] == 1.0)                       # deletions
    assert np.all(b[n:, :m] == 2.0)                       # insertions
    assert np.array_equal(b[n:, m:], np.zeros((m, n)))    # dummy-dummy is free
    # each real node has exactly one unmasked delete/insert slot
    assert np.count_nonzero(mask[:n, m:] == 0.0) == n
    assert np.count_nonzero(mask[n:, :m] == 0.0) == m
    assert np.array_equal(mask[:n, :m], np.zeros((n, m)))
    assert np.array_equal(mask[n:, m:], np.zeros((m, n)))


def test_degree_price_matrix():
    p2 = make_graph("p2", [1, 1], [(0, 1)])
    star = make_graph("s3", [1, 1, 1, 1], [(0, 1), (0, 2), (0, 3)])
    pair = pad_pair(p2, star)
    d = build_D(pair, cost_config(4))  # edge del 1, edge ins 2
    # g node 0 (degree 1) against the hub (degree 3): two edges must appear
    assert d[0, 0] == 4.0
    # hub missing: mapping a dummy (degree 0) onto it prices three insertions
    assert d[2, 0] == 6.0
    # degree-1 node onto degree-1 leaf costs nothing
    assert d[0, 1] == 0.0
    # deleting g node 0 (its slot column) prices its one edge
    assert d[0, pair.m + 0] == 1.0


def test_degree_price_direction():
    p2 = make_graph("p2", [1, 1], [(0, 1)])
    star = make_graph("s3", [1, 1, 1, 1], [(0, 1), (0, 2), (0, 3)])
    d_fwd = build_D(pad_pair(p2, star), cost_config(5))   # del 2, ins 1
    assert d_fwd[0, 0] == 2.0  # surplus on the h side: insertions at 1 each
    d_rev = build_D(pad_pair(star, p2), cost_config(5))
    assert d_rev[0, 0] == 4.0  # surplus on the g side: deletions at 2 each


def test_m_matrices_bounded_and_zero_dummy_block():
    g = synth_random(4, 0.5, 3, seed=0)
    h = synth_random(3, 0.5, 3, seed=1)
    pair = pad_pair(g, h)
    params = init_model_params(3, d=8, depth=2, seed=2)
    m_list = build_M(pair, encode(pair.left, params.encoder),
                     encode(pair.right, params.encoder))
    assert len(m_list) == 3
    for m in m_list:
        assert m.shape == (7, 7)
        assert m.data.min() >= -1e-12 and m.data.max() <= 1.0 + 1e-12
        assert np.array_equal(m.data[pair.n:, pair.m:], np.zeros((3, 4)))


def test_m_zero_on_equal_labels_level_zero():
    g = make_graph("g", [2, 3], [(0, 1)])
    h = make_graph("h", [2, 3], [(0, 1)])
    pair = pad_pair(g, h)
    params = init_model_params(3, d=8, depth=1, seed=3)
    m0 = build_M(pair, encode(pair.left, params.encoder),
                 encode(pair.right, params.encoder))[0]
    assert m0.data[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert m0.data[1, 1] == pytest.approx(0.0, abs=1e-12)
    assert m0.data[0, 1] > 1e-3  # different labels really cost something


def test_learned_costs_positive():
    g = synth_random(3, 0.5, 3, seed=4)
    h = synth_random(4, 0.5, 3, seed=5)
    pair = pad_pair(g, h)
    params = init_model_params(3, d=8, depth=2, seed=6)
    c_list = build_C(pair, encode(pair.left, params.encoder),
                     encode(pair.right, params.encoder), params.cost_mlps)
    assert len(c_list) == 3
    for c in c_list:
        assert c.shape == (7, 7)
        assert c.data.min() > 0.0


def test_forward_shapes_and_doubly_stochastic():
    g = synth_random(5, 0.5, 4, seed=7)
    h = synth_random(4, 0.5, 4, seed=8)
    params = init_model_params(4, d=8, depth=2, seed=9, lam=0.5)
    gs = init_gs_params(frame_size=16)
    res = forward_learned(g, h, params=params, gs=gs)
    f = g.n + h.n
    assert res.P.shape == (f, f)
    assert res.P.data.min() >= 0.0
    assert np.abs(res.P.data.sum(axis=1) - 1.0).max() < 1e-3
    assert np.abs(res.P.data.sum(axis=0) - 1.0).max() < 1e-3
    assert res.score.shape == ()
    assert np.isfinite(res.score.item())


def test_lambda_one_reduces_to_fixed_cost_forward():
    gs = init_gs_params(frame_size=16)
    for seed in range(5):
        g = synth_random(4, 0.5, 3, seed=20 + seed)
        h = synth_random(5, 0.5, 3, seed=30 + seed)
        params = init_model_params(3, d=8, depth=2, seed=seed, lam=1.0)
        a = forward_unsupervised(g, h, params=params, gs=gs)
        b = forward_learned(g, h, params=params, gs=gs)
        assert a.score.item() == b.score.item()  # bit-for-bit
        assert np.array_equal(a.P.data, b.P.data)


def test_matching_ignores_learned_costs():
    g = synth_random(4, 0.5, 3, seed=40)
    h = synth_random(4, 0.5, 3, seed=41)
    gs = init_gs_params(frame_size=16)
    params = init_model_params(3, d=8, depth=2, seed=42, lam=0.5)
    before = forward_learned(g, h, params=params, gs=gs)
    # scramble every cost network; the matching must not move
    rng = np.random.default_rng(99)
    for mlp in params.cost_mlps:
        for t in mlp.tensors():
            t.data = rng.standard_normal(t.data.shape)
    after = forward_learned(g, h, params=params, gs=gs)
    assert np.array_equal(before.P.data, after.P.data)
    assert before.score.item() != after.score.item()  # but the price moved


def test_identity_scores_near_zero_with_cold_matcher():
    gs = _cold_gs(temp=0.005)
    params = init_model_params(4, d=8, depth=2, seed=50, lam=1.0)
    rng = np.random.default_rng(51)
    for seed in range(5):
        g = synth_random(5, 0.5, 4, seed=60 + seed)
        h = permute_graph(g, rng.permutation(g.n))
        res = forward_unsupervised(g, h, params=params, gs=gs)
        # residual mass on wrong slots decays like exp(-gap/temp)
        assert abs(res.score.item()) < 1e-6


def test_learned_score_separates_self_from_stranger():
    gs = _cold_gs()
    params = init_model_params(4, d=8, depth=2, seed=70, lam=0.0)
    g = make_graph("g", [1, 2, 3], [(0, 1), (1, 2)])
    far = make_graph("f", [4, 4, 4, 4], [(0, 1), (0, 2), (0, 3)])
    self_score = forward_learned(g, g, params=params, gs=gs).score.item()
    far_score = forward_learned(g, far, params=params, gs=gs).score.item()
    assert self_score < 1e-2
    assert far_score > 10 * max(self_score, 1e-4)


def test_frame_capacity_guard():
    g = synth_random(9, 0.3, 3, seed=80)
    h = synth_random(8, 0.3, 3, seed=81)
    params = init_model_params(3, d=8, depth=1, seed=82)
    gs = init_gs_params(frame_size=16)
    with pytest.raises(ValueError, match="frame size"):
        forward_unsupervised(g, h, params=params, gs=gs)


def test_forward_deterministic_and_iter_override():
    g = synth_random(4, 0.5, 3, seed=90)
    h = synth_random(4, 0.5, 3, seed=91)
    params = init_model_params(3, d=8, depth=2, seed=92, lam=0.5)
    gs = init_gs_params(frame_size=16)
    a = forward_learned(g, h, params=params, gs=gs, sinkhorn_iters=12)
    b = forward_learned(g, h, params=params, gs=gs, sinkhorn_iters=12)
    assert a.score.item() == b.score.item()
    assert np.array_equal(a.P.data, b.P.data)


def test_params_round_trip_exact():
    params = init_model_params(4, d=8, depth=2, seed=93, lam=0.25,
                               costs=EditCostConfig(2, 1, 2, 1))
    arrays = params.to_arrays()
    other = init_model_params(4, d=8, depth=2, seed=7, lam=0.25,
                              costs=EditCostConfig(2, 1, 2, 1))
    other.load_arrays(arrays)
    for name, arr in other.to_arrays().items():
        assert np.array_equal(arr, arrays[name]), name


def test_beta_mixture_initially_uniform():
    params = init_model_params(3, d=8, depth=2, seed=94)
    import gedlearn.autodiff as ad
    beta = ad.softplus(params.beta_raw).data
    assert np.allclose(beta, 1.0, atol=1e-12)
    assert params.tau().item() == pytest.approx(1.0, abs=1e-12)
