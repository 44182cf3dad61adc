"""LSTM (return sequences) -> scaled dot-product self-attention -> flatten -> linear head.

Parameters live in a flat ``name -> ndarray`` mapping so that optimizers,
gradient checkers and the model store can treat them uniformly. Every forward
function accepts a batch of windows shaped ``(B, T, input_dim)`` and returns
the activations needed by the backward pass in training.py.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .errors import ShapeError
from .tensor import ACTIVATIONS, activation, sigmoid, softmax_rows

GATES = ("f", "i", "g", "o")  # forget, input, candidate, output


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 1
    hidden_units: int = 50
    time_step: int = 10
    attention_dim: int | None = None
    post_attention_activation: str = "relu"
    attention: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.attention_dim is None:
            object.__setattr__(self, "attention_dim", self.hidden_units)
        for name in ("input_dim", "hidden_units", "time_step", "attention_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.post_attention_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.post_attention_activation!r}")

    @property
    def d_k(self) -> int:
        return self.attention_dim

    @property
    def flat_dim(self) -> int:
        """Length of the flattened sequence fed to the dense head."""
        return self.time_step * (self.d_k if self.attention else self.hidden_units)

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered tensor names and shapes for ``config``."""
    d, h, k = config.input_dim, config.hidden_units, config.d_k
    shapes: dict[str, tuple[int, ...]] = {}
    for g in GATES:
        shapes[f"lstm.W_{g}"] = (d, h)
        shapes[f"lstm.U_{g}"] = (h, h)
        shapes[f"lstm.b_{g}"] = (h,)
    if config.attention:
        for p in ("Q", "K", "V"):
            shapes[f"attention.W_{p}"] = (h, k)
            shapes[f"attention.b_{p}"] = (k,)
    shapes["dense.W"] = (config.flat_dim, 1)
    shapes["dense.b"] = (1,)
    return shapes


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        expected = param_shapes(self.config)
        missing = [k for k in expected if k not in self.tensors]
        extra = [k for k in self.tensors if k not in expected]
        if missing or extra:
            raise ShapeError(f"parameter set mismatch: missing={missing} unexpected={extra}")
        for name, shape in expected.items():
            arr = np.asarray(self.tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {arr.shape}")
            self.tensors[name] = arr
        # keep the canonical ordering
        self.tensors = {k: self.tensors[k] for k in expected}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def size(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


def _glorot_bound(shape: tuple[int, ...]) -> float:
    fan_in, fan_out = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(config: ModelConfig) -> ModelParams:
    """Glorot-uniform weight matrices, zero biases; a pure function of ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    tensors = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            bound = _glorot_bound(shape)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(config, tensors)


def zero_params(config: ModelConfig) -> ModelParams:
    return ModelParams(config, {k: np.zeros(s) for k, s in param_shapes(config).items()})


def count_params(config: ModelConfig) -> dict[str, int]:
    d, h, k = config.input_dim, config.hidden_units, config.d_k
    return {
        "lstm": 4 * (d + h + 1) * h,
        "attention": 3 * (h * k + k) if config.attention else 0,
        "flatten": 0,
        "dense": config.flat_dim + 1,
    }


def _as_batch(config: ModelConfig, windows) -> np.ndarray:
    x = np.asarray(windows)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    if x.ndim == 2 and config.input_dim == 1 and x.shape[1] == config.time_step:
        x = x[:, :, None]
    elif x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (config.time_step, config.input_dim):
        raise ShapeError(
            f"expected windows shaped (B, {config.time_step}, {config.input_dim}), got {np.shape(windows)}"
        )
    return x


def lstm_forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Run the recurrence from h0 = c0 = 0 and return every hidden state.

    ``x`` is ``(B, T, input_dim)``; the result ``H`` is ``(B, T, hidden)``.
    The cache holds per-step gate activations and states for BPTT.
    """
    cfg = params.config
    if x.ndim != 3 or x.shape[2] != cfg.input_dim:
        raise ShapeError(f"lstm input must be (B, T, {cfg.input_dim}), got {x.shape}")
    B, T, _ = x.shape
    h_dim = cfg.hidden_units
    W = np.concatenate([params[f"lstm.W_{g}"] for g in GATES], axis=1)
    U = np.concatenate([params[f"lstm.U_{g}"] for g in GATES], axis=1)
    b = np.concatenate([params[f"lstm.b_{g}"] for g in GATES])

    xw = x @ W + b  # input contributions for all steps at once
    dt = xw.dtype
    h = np.zeros((B, h_dim), dtype=dt)
    c = np.zeros((B, h_dim), dtype=dt)
    H = np.empty((B, T, h_dim), dtype=dt)
    gates = np.empty((B, T, 4 * h_dim), dtype=dt)
    cells = np.zeros((B, T + 1, h_dim), dtype=dt)
    tanh_c = np.empty((B, T, h_dim), dtype=dt)
    for t in range(T):
        z = xw[:, t] + h @ U
        f = sigmoid(z[:, :h_dim])
        i = sigmoid(z[:, h_dim:2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim:3 * h_dim])
        o = sigmoid(z[:, 3 * h_dim:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[:, t] = np.concatenate([f, i, g, o], axis=1)
        cells[:, t + 1] = c
        tanh_c[:, t] = tc
        H[:, t] = h
    return H, {"x": x, "U": U, "gates": gates, "cells": cells, "tanh_c": tanh_c, "H": H}


def attention_forward(params: ModelParams, H: np.ndarray) -> tuple[np.ndarray, dict]:
    """``act(softmax(Q K^T / sqrt(d_k)) V)`` with learned affine Q/K/V projections."""
    cfg = params.config
    if H.ndim != 3 or H.shape[2] != cfg.hidden_units:
        raise ShapeError(f"attention input must be (B, T, {cfg.hidden_units}), got {H.shape}")
    Q = H @ params["attention.W_Q"] + params["attention.b_Q"]
    K = H @ params["attention.W_K"] + params["attention.b_K"]
    V = H @ params["attention.W_V"] + params["attention.b_V"]
    scores = Q @ K.transpose(0, 2, 1) / np.sqrt(cfg.d_k)
    P = softmax_rows(scores)
    Z = P @ V
    A = activation(cfg.post_attention_activation, Z)
    return A, {"H": H, "Q": Q, "K": K, "V": V, "P": P, "Z": Z, "A": A}


def model_forward(params: ModelParams, windows) -> tuple[np.ndarray, dict]:
    """Predict the next scaled value for each window.

    Returns predictions of shape ``(B,)`` and the activation cache. A single
    ``(T, input_dim)`` window is promoted to a batch of one.
    """
    cfg = params.config
    x = _as_batch(cfg, windows)
    H, lstm_cache = lstm_forward(params, x)
    cache = {"lstm": lstm_cache}
    if cfg.attention:
        A, cache["attention"] = attention_forward(params, H)
    else:
        A = H
    flat = A.reshape(A.shape[0], -1)
    y = (flat @ params["dense.W"])[:, 0] + params["dense.b"][0]
    cache["flat"] = flat
    return y, cache


def predict(params: ModelParams, windows) -> np.ndarray:
    y, _ = model_forward(params, windows)
    return y
