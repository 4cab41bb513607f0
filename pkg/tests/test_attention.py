import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from t3s2s.attention import (
    DenseTuneParams,
    LayerConfig,
    ProjectionWeights,
    amplify_value_topk,
    attend,
    attention_logits,
    characteristics_mask,
    default_layer_stack,
    dense_tune,
    layer_forward,
    project,
    prominence,
    softmax_rows,
    topk_value_indices,
)
from t3s2s.errors import ConfigError, DimensionMismatch, KTooLarge, MaskLengthMismatch
from t3s2s.prompt import KeywordIndices


def kw(*pairs):
    q = tuple(p[0] for p in pairs)
    return KeywordIndices(q, tuple(p[1] for p in pairs), tuple(f"w{t}" for t in q))


def test_layer_config_defaults():
    stack = default_layer_stack()
    assert [c.placement for c in stack] == ["down_0", "down_2", "mid_0", "up_1", "up_0"]
    assert [c.dense_tuning for c in stack] == [False, True, True, False, False]
    assert [(c.h, c.d_m) for c in stack] == [(32, 64), (16, 128), (8, 128), (16, 128), (32, 64)]
    with pytest.raises(ConfigError):
        LayerConfig(0, "x", 2, 2, d_m=5, heads=2)


def test_project_linear_and_deterministic():
    w1 = ProjectionWeights.from_seed(3, 4, 6, 4, 2)
    w2 = ProjectionWeights.from_seed(3, 4, 6, 4, 2)
    assert w1.W_Q.tobytes() == w2.W_Q.tobytes()
    S = np.random.default_rng(0).standard_normal((5, 6))
    Qs, Ks, Vs = project(np.zeros((3, 4)), S, w1)
    assert all(not Q.any() for Q in Qs)
    assert Vs[1].shape == (5, 2)
    with pytest.raises(DimensionMismatch):
        project(np.zeros((3, 5)), S, w1)


def test_project_identity_value():
    d = 3
    eye = np.eye(d)
    w = ProjectionWeights(eye, eye, eye, 1)
    S = np.arange(6.0).reshape(2, 3)
    _, _, Vs = project(np.ones((1, 3)), S, w)
    assert np.array_equal(Vs[0], S)


def test_attention_logits_examples():
    assert not attention_logits(np.zeros((1, 3)), np.ones((4, 3))).any()
    assert attention_logits(np.array([[1.0]]), np.array([[1.0]]), 1)[0, 0] == 1.0
    rng = np.random.default_rng(1)
    Q, K = rng.standard_normal((3, 4)), rng.standard_normal((5, 4))
    np.testing.assert_allclose(attention_logits(2.5 * Q, K), 2.5 * attention_logits(Q, K), rtol=1e-12)


def test_keyword_row_scaling_scales_only_its_column():
    rng = np.random.default_rng(2)
    Q, K = rng.standard_normal((6, 4)), rng.standard_normal((5, 4))
    K2 = K.copy()
    K2[3] *= 1.7
    a, b = attention_logits(Q, K), attention_logits(Q, K2)
    np.testing.assert_allclose(b[:, 3], 1.7 * a[:, 3], rtol=1e-12)
    other = [0, 1, 2, 4]
    assert b[:, other].tobytes() == a[:, other].tobytes()


def test_softmax_examples():
    assert softmax_rows(np.full((1, 4), 3.0)).tolist() == [[0.25] * 4]
    assert softmax_rows(np.array([[7.0]])).tolist() == [[1.0]]
    x = np.random.default_rng(0).standard_normal((3, 6))
    np.testing.assert_allclose(softmax_rows(x + 11.0), softmax_rows(x), atol=1e-9)


def test_attend_examples():
    V = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(attend(np.eye(4), V), V)
    np.testing.assert_allclose(attend(np.full((2, 4), 0.25), V), np.tile(V.mean(axis=0), (2, 1)))
    assert not attend(np.full((2, 4), 0.25), np.zeros((4, 3))).any()
    with pytest.raises(DimensionMismatch):
        attend(np.ones((2, 3)), V)


def test_dense_tune_zero_cases():
    rng = np.random.default_rng(0)
    L = rng.standard_normal((4, 5))
    masks = {1: np.array([1, 0, 0, 0], np.uint8)}
    q = kw((2, 1))
    assert dense_tune(L, masks, q, DenseTuneParams(0.0, 2.0, 1.0)).tobytes() == L.tobytes()
    assert dense_tune(L, masks, q, DenseTuneParams(2.5, 2.0, 0.0)).tobytes() == L.tobytes()
    full = {1: np.ones(4, np.uint8)}
    assert dense_tune(L, full, q, DenseTuneParams(2.5, 2.0, 1.0)).tobytes() == L.tobytes()
    with pytest.raises(MaskLengthMismatch):
        dense_tune(L, {1: np.ones(3, np.uint8)}, q, DenseTuneParams())


def test_dense_tune_closed_form():
    L = np.array([[0.0, 1.0], [0.0, 3.0], [0.0, -1.0], [0.0, 2.0]])
    masks = {7: np.array([1, 0, 0, 0], np.uint8)}
    # area 1/4 -> w = 0.75; sigma = 0.5 * 1 -> coefficient 0.375
    out = dense_tune(L, masks, kw((1, 7)), DenseTuneParams(0.5, 2.0, 1.0))
    c = 0.375
    expected = [1 + c * (3 - 1), 3 - c * (3 - -1), -1 - c * 0.0, 2 - c * (2 - -1)]
    np.testing.assert_allclose(out[:, 1], expected, rtol=0, atol=1e-15)
    assert out[:, 0].tobytes() == L[:, 0].tobytes()


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), tau=st.floats(0.01, 1.0), strength=st.floats(0.1, 5.0))
def test_dense_tune_properties(seed, tau, strength):
    rng = np.random.default_rng(seed)
    b, n = int(rng.integers(2, 40)), int(rng.integers(3, 12))
    L = rng.standard_normal((b, n)) * 2
    cols = sorted(rng.choice(np.arange(1, n), size=min(3, n - 1), replace=False).tolist())
    masks = {}
    for i, _ in enumerate(cols):
        m = np.zeros(b, np.uint8)
        m[rng.choice(b, size=int(rng.integers(1, b)), replace=False)] = 1
        masks[i + 1] = m
    q = kw(*[(t, i + 1) for i, t in enumerate(cols)])
    out = dense_tune(L, masks, q, DenseTuneParams(strength, 2.0, tau))
    A = softmax_rows(out)
    np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-6)
    for i, t in enumerate(cols):
        m = masks[i + 1].astype(bool)
        assert out[:, t].max() <= L[:, t].max() and out[:, t].min() >= L[:, t].min()
        assert out[m, t].mean() >= L[m, t].mean()
        assert out[~m, t].mean() <= L[~m, t].mean()
    untouched = [c for c in range(n) if c not in cols]
    assert out[:, untouched].tobytes() == L[:, untouched].tobytes()


def test_topk_value_indices_errors():
    with pytest.raises(KTooLarge):
        topk_value_indices(np.ones((4, 2)), 3, 3)


def test_characteristics_mask_examples():
    level = {1: np.array([1, 0, 1], np.uint8), 2: np.array([1, 1, 0], np.uint8)}
    q = kw((2, 1), (3, 2))
    Y = np.array([[4, 1], [2, 4], [2, 3]])
    H = characteristics_mask(Y, q, level, n=6)
    assert H[:, 0].tolist() == [0, 0, 0]
    assert H[:, 1].tolist() == [1, 0, 1]  # river mask only
    assert H[:, 2].tolist() == [2, 1, 1]  # overlap sums to 2
    assert not characteristics_mask(Y, KeywordIndices((), (), ()), level, 6).any()


def test_prominence_examples():
    F = np.random.default_rng(0).standard_normal((3, 4))
    assert prominence(F, np.ones((3, 4), np.int32), 0.0).tobytes() == F.tobytes()
    assert np.array_equal(prominence(F, np.ones((3, 4), np.int32), 1.0), 2 * F)
    assert prominence(np.array([[0.5]]), np.array([[2]]), 1.0)[0, 0] == 1.5
    with pytest.raises(ConfigError):
        prominence(F, np.zeros((3, 4), np.int32), -1.0)


def test_amplify_value_topk_examples():
    V = np.array([[1.0], [-3.0], [2.0]])
    assert amplify_value_topk(V, 1, 2.0, 3).ravel().tolist() == [1.0, -6.0, 2.0]
    assert np.array_equal(amplify_value_topk(V, 0, 2.0, 3), V)
    assert np.array_equal(amplify_value_topk(V, 2, 1.0, 3), V)


def _layer_inputs(seed=0, n=10, d=8):
    rng = np.random.default_rng(seed)
    cfg = LayerConfig(0, "down_2", 4, 4, d_m=8, heads=2, weight_seed=seed)
    X = rng.standard_normal((16, 8))
    S = rng.standard_normal((n, d))
    m1 = np.zeros(16, np.uint8)
    m1[:3] = 1
    m2 = np.zeros(16, np.uint8)
    m2[5:12] = 1
    return cfg, X, S, {1: m1, 2: m2}


def _plain(cfg, X, S):
    w = ProjectionWeights.from_seed(cfg.weight_seed, cfg.d_m, S.shape[1], cfg.d_m, cfg.heads)
    Qs, Ks, Vs = project(X, S, w)
    F = np.concatenate([softmax_rows(attention_logits(Q, K, cfg.d_h)) @ V for Q, K, V in zip(Qs, Ks, Vs)], axis=1)
    return X + F


def test_layer_forward_tunings_off_equals_plain():
    cfg, X, S, level = _layer_inputs()
    q = kw((2, 1), (5, 2))
    res = layer_forward(cfg, X, S, level, q, i_end=7, tau=1.0, cp=(2, 0.0), dt=DenseTuneParams(0.0))
    assert res.output.tobytes() == _plain(cfg, X, S).tobytes()


def test_layer_forward_empty_q_is_dense_only():
    cfg, X, S, level = _layer_inputs()
    res = layer_forward(cfg, X, S, level, KeywordIndices((), (), ()), i_end=7, cp=(2, 1.0), dt=DenseTuneParams())
    assert all(not H.any() for H in res.enhancement)
    assert res.output.tobytes() == _plain(cfg, X, S).tobytes()


def test_layer_forward_deterministic_and_residual():
    cfg, X, S, level = _layer_inputs(3)
    q = kw((2, 1), (5, 2))
    a = layer_forward(cfg, X, S, level, q, 7, 0.6, (2, 1.0), DenseTuneParams())
    b = layer_forward(cfg, X, S, level, q, 7, 0.6, (2, 1.0), DenseTuneParams())
    assert a.output.tobytes() == b.output.tobytes()
    assert a.output.tobytes() == (X + a.enhanced).tobytes()
    for A in a.attention:
        np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-6)
    assert all(Y.shape == (4, 2) for Y in a.topk)


def test_layer_forward_dense_flag_respected():
    cfg, X, S, level = _layer_inputs()
    off = LayerConfig(0, "up_1", 4, 4, d_m=8, heads=2, weight_seed=0)
    q = kw((2, 1), (5, 2))
    with_dt = layer_forward(off, X, S, level, q, 7, 1.0, None, DenseTuneParams())
    without = layer_forward(off, X, S, level, q, 7, 1.0, None, None)
    assert with_dt.output.tobytes() == without.output.tobytes()
    on = layer_forward(cfg, X, S, level, q, 7, 1.0, None, DenseTuneParams())
    assert on.output.tobytes() != without.output.tobytes()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 4.0), K=st.integers(0, 4))
def test_cp_monotone(seed, beta, K):
    cfg, X, S, level = _layer_inputs(seed % 1000)
    res = layer_forward(cfg, X, S, level, kw((2, 1), (5, 2)), 7, 1.0, (K, beta), None)
    F, G = res.features, res.enhanced
    H = np.concatenate(res.enhancement, axis=1)
    assert np.all(np.abs(G) >= np.abs(F))
    assert G[H == 0].tobytes() == F[H == 0].tobytes()
    strict = (H > 0) & (F != 0) & (beta > 1e-6)
    assert np.all(np.abs(G[strict]) > np.abs(F[strict]))
