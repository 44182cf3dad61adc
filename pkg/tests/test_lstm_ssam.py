import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssamforecast.errors import ShapeError
from ssamforecast.lstm_ssam import (
    ModelConfig,
    ModelParams,
    attention_forward,
    count_params,
    init_params,
    lstm_forward,
    model_forward,
    param_shapes,
    zero_params,
)


def randomized(config, seed, scale=0.5):
    """Random params including non-zero biases."""
    p = init_params(config)
    rng = np.random.default_rng(seed)
    for k in p:
        p.tensors[k] = rng.normal(0, scale, p[k].shape)
    return p


def attention_oracle(p, H):
    """Triple-loop evaluation of act(softmax(QK^T/sqrt(d)) V) for a single (T, h) sequence."""
    cfg = p.config
    T, h = H.shape
    d = cfg.d_k

    def project(W, b):
        out = [[0.0] * d for _ in range(T)]
        for t in range(T):
            for j in range(d):
                out[t][j] = b[j] + sum(H[t][m] * W[m][j] for m in range(h))
        return out

    Q = project(p["attention.W_Q"], p["attention.b_Q"])
    K = project(p["attention.W_K"], p["attention.b_K"])
    V = project(p["attention.W_V"], p["attention.b_V"])
    A = [[0.0] * d for _ in range(T)]
    for i in range(T):
        scores = [sum(Q[i][m] * K[j][m] for m in range(d)) / math.sqrt(d) for j in range(T)]
        top = max(scores)
        w = [math.exp(s - top) for s in scores]
        total = sum(w)
        for j in range(d):
            z = sum(w[k] / total * V[k][j] for k in range(T))
            A[i][j] = max(z, 0.0)
    return np.array(A)


def test_default_shapes_and_counts():
    cfg = ModelConfig()
    counts = count_params(cfg)
    assert counts == {"lstm": 10400, "attention": 7650, "flatten": 0, "dense": 501}
    assert cfg.flat_dim == 500
    p = init_params(cfg)
    H, _ = lstm_forward(p, np.zeros((1, 10, 1)))
    assert H.shape == (1, 10, 50)
    A, _ = attention_forward(p, H)
    assert A.shape == (1, 10, 50)
    y, cache = model_forward(p, np.zeros((10, 1)))
    assert y.shape == (1,) and cache["flat"].shape == (1, 500)


def test_plain_lstm_counts():
    counts = count_params(ModelConfig(hidden_units=1, attention=False))
    assert counts == {"lstm": 4 * 3 * 1, "attention": 0, "flatten": 0, "dense": 11}


@given(
    st.integers(1, 4), st.integers(1, 12), st.integers(1, 12), st.integers(1, 12), st.booleans()
)
@settings(max_examples=20)
def test_count_params_matches_enumeration(d, h, t, k, attention):
    cfg = ModelConfig(input_dim=d, hidden_units=h, time_step=t, attention_dim=k, attention=attention)
    p = init_params(cfg)
    counts = count_params(cfg)
    lstm = sum(v.size for name, v in p.tensors.items() if name.startswith("lstm."))
    attn = sum(v.size for name, v in p.tensors.items() if name.startswith("attention."))
    dense = sum(v.size for name, v in p.tensors.items() if name.startswith("dense."))
    assert (counts["lstm"], counts["attention"], counts["dense"]) == (lstm, attn, dense)
    assert sum(counts.values()) == p.size()


def test_init_is_deterministic_and_glorot():
    cfg = ModelConfig(hidden_units=7, time_step=5, seed=11)
    a, b = init_params(cfg), init_params(cfg)
    for name in a:
        assert a[name].tobytes() == b[name].tobytes()
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 1:
            assert not np.any(a[name]), name
        else:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
            assert np.all(np.abs(a[name]) <= bound), name
            assert np.abs(a[name]).max() > 0.5 * bound
    other = init_params(ModelConfig(hidden_units=7, time_step=5, seed=12))
    assert not np.array_equal(a["lstm.U_f"], other["lstm.U_f"])


def test_params_validate_shapes():
    cfg = ModelConfig(hidden_units=3, time_step=2)
    tensors = zero_params(cfg).tensors
    tensors["dense.W"] = np.zeros((5, 1))
    with pytest.raises(ShapeError):
        ModelParams(cfg, tensors)
    tensors = zero_params(cfg).tensors
    del tensors["dense.b"]
    with pytest.raises(ShapeError, match="dense.b"):
        ModelParams(cfg, tensors)


def test_zero_params_give_zero_everywhere():
    cfg = ModelConfig(hidden_units=6, time_step=4)
    p = zero_params(cfg)
    x = np.random.default_rng(0).uniform(size=(3, 4, 1))
    H, cache = lstm_forward(p, x)
    assert not np.any(H)
    assert np.all(cache["gates"][:, :, :6] == 0.5)
    y, _ = model_forward(p, x)
    assert np.array_equal(y, np.zeros(3))


def test_single_step_is_one_cell():
    cfg = ModelConfig(hidden_units=4, time_step=1)
    p = randomized(cfg, 3)
    x = np.array([[[0.7]]])
    H, _ = lstm_forward(p, x)

    def sig(v):
        return 1 / (1 + np.exp(-v))

    pre = {g: x[0, 0] @ p[f"lstm.W_{g}"] + p[f"lstm.b_{g}"] for g in "figo"}
    c = sig(pre["i"]) * np.tanh(pre["g"])
    h = sig(pre["o"]) * np.tanh(c)
    assert np.allclose(H[0, 0], h, rtol=0, atol=1e-15)


def test_lstm_matches_stepwise_loop():
    cfg = ModelConfig(input_dim=2, hidden_units=3, time_step=5)
    p = randomized(cfg, 8)
    x = np.random.default_rng(1).normal(size=(2, 5, 2))
    H, _ = lstm_forward(p, x)

    def sig(v):
        return 1 / (1 + np.exp(-v))

    for b in range(2):
        h = np.zeros(3)
        c = np.zeros(3)
        for t in range(5):
            z = {g: x[b, t] @ p[f"lstm.W_{g}"] + h @ p[f"lstm.U_{g}"] + p[f"lstm.b_{g}"] for g in "figo"}
            c = sig(z["f"]) * c + sig(z["i"]) * np.tanh(z["g"])
            h = sig(z["o"]) * np.tanh(c)
            assert np.allclose(H[b, t], h, rtol=0, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_attention_matches_triple_loop(seed):
    cfg = ModelConfig(hidden_units=4, attention_dim=4, time_step=3)
    p = randomized(cfg, seed)
    H = np.random.default_rng(seed + 100).normal(size=(1, 3, 4))
    A, _ = attention_forward(p, H)
    assert np.max(np.abs(A[0] - attention_oracle(p, H[0]))) <= 1e-12


def test_attention_single_step_and_zero_values():
    cfg = ModelConfig(hidden_units=5, attention_dim=3, time_step=1)
    p = randomized(cfg, 4)
    H = np.random.default_rng(0).normal(size=(2, 1, 5))
    A, cache = attention_forward(p, H)
    assert np.all(cache["P"] == 1.0)
    assert np.array_equal(A, np.maximum(cache["V"], 0.0))

    cfg = ModelConfig(hidden_units=5, attention_dim=3, time_step=6)
    p = randomized(cfg, 5)
    p.tensors["attention.W_V"][:] = 0.0
    p.tensors["attention.b_V"][:] = 0.0
    A, _ = attention_forward(p, np.random.default_rng(1).normal(size=(2, 6, 5)))
    assert not np.any(A)


@given(st.integers(0, 10**6))
@settings(max_examples=25)
def test_attention_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(hidden_units=4, attention_dim=3, time_step=6)
    p = randomized(cfg, seed)
    H = rng.normal(size=(1, 6, 4))
    perm = rng.permutation(6)
    A, _ = attention_forward(p, H)
    Ap, _ = attention_forward(p, H[:, perm])
    assert np.allclose(Ap, A[:, perm], rtol=0, atol=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 6), st.integers(1, 8), st.booleans())
@settings(max_examples=30)
def test_shape_contract_and_bounded_hidden(seed, h, k, t, attention):
    cfg = ModelConfig(hidden_units=h, attention_dim=k, time_step=t, attention=attention, seed=seed)
    p = randomized(cfg, seed, scale=2.0)
    x = np.random.default_rng(seed).normal(0, 3, size=(2, t, 1))
    y, cache = model_forward(p, x)
    assert y.shape == (2,) and np.all(np.isfinite(y))
    H = cache["lstm"]["H"]
    assert H.shape == (2, t, h)
    assert np.all(np.abs(H) < 1.0)
    if attention:
        assert cache["attention"]["A"].shape == (2, t, k)
        assert np.all(np.abs(cache["attention"]["P"].sum(-1) - 1.0) <= 1e-12)
    assert cache["flat"].shape == (2, cfg.flat_dim)


def test_dense_head_is_linear():
    cfg = ModelConfig(hidden_units=4, time_step=3)
    p = randomized(cfg, 2)
    x = np.random.default_rng(5).uniform(size=(1, 3, 1))
    y0, cache = model_forward(p, x)
    delta = 0.125
    j = 7
    p.tensors["dense.W"][j, 0] += delta
    y1, _ = model_forward(p, x)
    assert y1[0] - y0[0] == pytest.approx(delta * cache["flat"][0, j], abs=1e-14)


def test_forward_rejects_bad_window():
    p = init_params(ModelConfig(hidden_units=3, time_step=4))
    with pytest.raises(ShapeError):
        model_forward(p, np.zeros((2, 5, 1)))
    with pytest.raises(ShapeError):
        model_forward(p, np.zeros((2, 4, 2)))
