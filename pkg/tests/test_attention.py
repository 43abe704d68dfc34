import math

import numpy as np
import pytest

from mltc import tensor as T
from mltc.attention import (AttentionParams, head_masks, local_window_mask, multi_level_attention,
                            padding_mask, scaled_dot_attention, write_attention_tsv)
from mltc.errors import DegenerateMask
from mltc.gradcheck import grad_check
from mltc.tensor import Tensor


def make_params(d_model=8, n_heads=4, n_global=2, window=1, seed=0):
    rng = np.random.default_rng(seed)
    return AttentionParams.init(d_model, n_heads, n_global, window, rng)


def with_groups(p, n_global, window):
    return AttentionParams(p.W_q, p.W_k, p.W_v, p.W_o, n_heads=p.n_heads, n_global=n_global, window=window)


def rand(shape, seed):
    return Tensor(np.random.default_rng(seed).normal(size=shape))


def test_single_position_returns_v():
    V = rand((1, 3), 2)
    out = scaled_dot_attention(rand((1, 3), 0), rand((1, 3), 1), V, np.ones((1, 1), bool))
    np.testing.assert_allclose(out.data, V.data, rtol=1e-15)


def test_equal_keys_give_column_mean_of_v():
    K = Tensor(np.tile(np.array([[0.3, -1.0, 2.0]]), (4, 1)))
    V = rand((4, 3), 5)
    out = scaled_dot_attention(rand((4, 3), 4), K, V)
    np.testing.assert_allclose(out.data, np.tile(V.data.mean(axis=0), (4, 1)), rtol=1e-12)


def test_saturated_scores_concentrate_on_matching_key():
    c = 20.0
    Q = K = Tensor(np.eye(2) * c)
    V = Tensor(np.eye(2))
    out, w = scaled_dot_attention(Q, K, V, return_weights=True)
    # weight on the matching key is 1 / (1 + exp(-c^2 / sqrt(2)))
    assert np.all(np.diag(w) > 0.99)
    np.testing.assert_allclose(np.diag(w), 1.0 / (1.0 + math.exp(-c * c / math.sqrt(2))), rtol=1e-12)
    np.testing.assert_allclose(out.data, np.eye(2), atol=1e-12)


def test_local_window_mask_shapes():
    assert np.array_equal(local_window_mask(3, 0), np.eye(3, dtype=bool))
    expect = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=bool)
    assert np.array_equal(local_window_mask(3, 1), expect)
    pad = np.array([True, True, True, False, False])
    assert np.array_equal(local_window_mask(5, 4, pad), padding_mask(5, pad))
    assert np.array_equal(local_window_mask(5, 9, pad), padding_mask(5, pad))


def test_local_window_mask_excludes_pad_keys_but_keeps_real_self():
    pad = np.array([True, False, True, False])
    m = local_window_mask(4, 1, pad)
    assert not m[:, 1].any() and not m[:, 3].any()
    assert m[0, 0] and m[2, 2]


def test_head_masks_never_degenerate():
    pad = np.array([[True, True, False, False, False, False, False]])
    masks = head_masks(pad, n_heads=4, n_global=2, window=1)
    assert masks.any(axis=-1).all()
    # band is respected on every row of the local heads, pad rows included
    i, j = np.indices((7, 7))
    assert not masks[0, 2:][:, np.abs(i - j) > 1].any()


def test_wide_window_matches_all_global():
    p = make_params(window=10)
    X = rand((6, 8), 3)
    a = multi_level_attention(X, p)
    b = multi_level_attention(X, with_groups(p, 4, 0))
    np.testing.assert_allclose(a.data, b.data, atol=1e-9, rtol=0)


def test_zero_window_local_head_is_value_projection():
    p = make_params(window=0, n_global=3)
    X = rand((5, 8), 1)
    _, w = multi_level_attention(X, p, return_weights=True)
    assert np.array_equal(w[0, 3], np.eye(5))
    # last head output == its slice of X W_v
    values = X.data @ p.W_v.data
    np.testing.assert_allclose(w[0, 3] @ values[:, 6:8], values[:, 6:8], rtol=1e-15)


def test_global_heads_are_permutation_equivariant():
    p = make_params(n_global=2, window=1)
    X = rand((5, 8), 7)
    perm = np.random.default_rng(0).permutation(5)
    all_global = with_groups(p, 4, 0)
    out = multi_level_attention(X, all_global).data
    out_perm = multi_level_attention(Tensor(X.data[perm]), all_global).data
    np.testing.assert_allclose(out_perm, out[perm], atol=1e-12)
    _, w = multi_level_attention(X, p, return_weights=True)
    _, wp = multi_level_attention(Tensor(X.data[perm]), p, return_weights=True)
    np.testing.assert_allclose(wp[0, :2], w[0, :2][:, perm][:, :, perm], atol=1e-12)


def test_weights_rows_sum_to_one_and_respect_band():
    p = make_params(window=2)
    X = rand((3, 9, 8), 11)
    pad = np.ones((3, 9), bool)
    pad[1, 6:] = False
    pad[2, 3:] = False
    _, w = multi_level_attention(X, p, pad, return_weights=True)
    assert np.all(np.abs(w.sum(axis=-1) - 1) <= 1e-12)
    i, j = np.indices((9, 9))
    assert np.all(w[:, 2:][:, :, np.abs(i - j) > 2] == 0.0)
    for b in range(3):
        assert np.all(w[b][..., ~pad[b]][:, pad[b]] == 0.0)


def test_batched_equals_per_example():
    p = make_params(window=1)
    X = rand((2, 6, 8), 2)
    pad = np.array([[True] * 6, [True] * 4 + [False] * 2])
    batched = multi_level_attention(X, p, pad).data
    for b in range(2):
        single = multi_level_attention(Tensor(X.data[b]), p, pad[b]).data
        np.testing.assert_allclose(batched[b], single, atol=1e-14)


def test_pad_tokens_do_not_affect_real_positions():
    p = make_params(window=1)
    X = rand((1, 7, 8), 3).data
    pad = np.array([[True] * 4 + [False] * 3])
    X2 = X.copy()
    X2[0, 4:] = np.random.default_rng(9).normal(size=(3, 8)) * 50
    a = multi_level_attention(Tensor(X), p, pad).data
    b = multi_level_attention(Tensor(X2), p, pad).data
    np.testing.assert_array_equal(a[0, :4], b[0, :4])


def test_all_pad_sequence_raises():
    with pytest.raises(DegenerateMask):
        multi_level_attention(rand((1, 3, 8), 0), make_params(), np.zeros((1, 3), bool))


def test_param_invariants():
    with pytest.raises(ValueError):
        make_params(d_model=6, n_heads=4)
    with pytest.raises(ValueError):
        make_params(n_global=0)
    with pytest.raises(ValueError):
        make_params(window=-1)


def test_attention_params_gradcheck():
    p = make_params(d_model=8, n_heads=4, n_global=2, window=1, seed=3)
    X = rand((2, 5, 8), 4)
    pad = np.array([[True] * 5, [True] * 3 + [False] * 2])
    R = np.random.default_rng(1).normal(size=(2, 5, 8))

    def f(_):
        return T.sum_(T.mul(multi_level_attention(X, p, pad), Tensor(R)))

    assert grad_check(f, p.tensors(), eps=1e-6) <= 1e-4


def test_write_attention_tsv(tmp_path):
    p = make_params(window=1)
    _, w = multi_level_attention(rand((3, 8), 0), p, return_weights=True)
    write_attention_tsv(w, tmp_path / "w.tsv", n_global=p.n_global)
    lines = (tmp_path / "w.tsv").read_text().splitlines()
    assert lines[0] == "batch\thead\tlevel\tquery\tkey\tweight"
    assert len(lines) == 1 + 4 * 9
    local = [l.split("\t") for l in lines[1:] if l.split("\t")[2] == "local"]
    assert all(float(r[5]) == 0.0 for r in local if abs(int(r[3]) - int(r[4])) > 1)
