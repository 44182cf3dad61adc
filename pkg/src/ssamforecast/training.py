"""MSE loss, backpropagation through the full model, Adam, and the training loop."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalError, ShapeError
from .lstm_ssam import GATES, ModelConfig, ModelParams, init_params, model_forward
from .preprocess import WindowedDataset
from .tensor import activation_grad

log = logging.getLogger(__name__)

Gradients = dict  # name -> ndarray, same layout as ModelParams.tensors


@dataclass(frozen=True)
class AdamHyper:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: ModelParams) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), 0)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 10
    epochs: int = 50
    shuffle_seed: int = 0
    shuffle: bool = True
    hyper: AdamHyper = field(default_factory=AdamHyper)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def mse_loss(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise ValueError(f"need equal non-empty lengths, got {p.size} and {t.size}")
    return float(np.mean((p - t) ** 2))


def _targets(targets, batch: int) -> np.ndarray:
    y = np.asarray(targets, dtype=np.float64).ravel()
    if y.size != batch or batch == 0:
        raise ShapeError(f"{batch} windows but {y.size} targets")
    return y


def backward(params: ModelParams, windows, targets) -> tuple[float, Gradients]:
    """Batch-mean MSE and its exact gradient with respect to every parameter."""
    cfg = params.config
    pred, cache = model_forward(params, windows)
    B = pred.shape[0]
    y = _targets(targets, B)
    diff = pred - y
    loss = float(np.mean(diff ** 2))

    grads: Gradients = {}
    dy = 2.0 * diff / B  # (B,)
    flat = cache["flat"]
    grads["dense.W"] = flat.T @ dy[:, None]
    grads["dense.b"] = np.array([dy.sum()])
    dflat = dy[:, None] * params["dense.W"][:, 0][None, :]

    T = cfg.time_step
    if cfg.attention:
        ac = cache["attention"]
        dA = dflat.reshape(B, T, cfg.d_k)
        dZ = dA * activation_grad(cfg.post_attention_activation, ac["Z"], ac["A"])
        P, Q, K, V, H = ac["P"], ac["Q"], ac["K"], ac["V"], ac["H"]
        dP = dZ @ V.transpose(0, 2, 1)
        dV = P.transpose(0, 2, 1) @ dZ
        dS = P * (dP - np.sum(dP * P, axis=-1, keepdims=True))
        dS /= np.sqrt(cfg.d_k)
        dQ = dS @ K
        dK = dS.transpose(0, 2, 1) @ Q
        dH = np.zeros_like(H)
        for name, d in (("Q", dQ), ("K", dK), ("V", dV)):
            W = params[f"attention.W_{name}"]
            grads[f"attention.W_{name}"] = np.einsum("bth,btk->hk", H, d)
            grads[f"attention.b_{name}"] = d.sum(axis=(0, 1))
            dH += d @ W.T
    else:
        dH = dflat.reshape(B, T, cfg.hidden_units)

    lc = cache["lstm"]
    dW, dU, db = _lstm_backward(lc, dH, cfg.hidden_units)
    h = cfg.hidden_units
    for k, g in enumerate(GATES):
        sl = slice(k * h, (k + 1) * h)
        grads[f"lstm.W_{g}"] = dW[:, sl]
        grads[f"lstm.U_{g}"] = dU[:, sl]
        grads[f"lstm.b_{g}"] = db[sl]

    return loss, {k: grads[k] for k in params}


def _lstm_backward(cache: dict, dH: np.ndarray, h: int):
    x, U, gates = cache["x"], cache["U"], cache["gates"]
    cells, tanh_c, H = cache["cells"], cache["tanh_c"], cache["H"]
    B, T, _ = x.shape
    dW = np.zeros((x.shape[2], 4 * h))
    dU = np.zeros((h, 4 * h))
    db = np.zeros(4 * h)
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    for t in reversed(range(T)):
        f = gates[:, t, :h]
        i = gates[:, t, h:2 * h]
        g = gates[:, t, 2 * h:3 * h]
        o = gates[:, t, 3 * h:]
        tc = tanh_c[:, t]
        dh = dH[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate(
            [
                dc * cells[:, t] * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                dc * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ],
            axis=1,
        )
        dW += x[:, t].T @ dz
        if t > 0:
            dU += H[:, t - 1].T @ dz
        db += dz.sum(axis=0)
        dh_next = dz @ U.T
        dc_next = dc * f
    return dW, dU, db


def batch_loss(params: ModelParams, windows, targets) -> float:
    pred, _ = model_forward(params, windows)
    return mse_loss(pred, _targets(targets, pred.shape[0]))


def central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``theta`` by central differences, one entry at a time."""
    theta = np.array(theta, dtype=np.result_type(theta, np.float64))
    grad = np.zeros_like(theta)
    flat = theta.reshape(-1)
    gflat = grad.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + eps
        up = f(theta)
        flat[j] = orig - eps
        down = f(theta)
        flat[j] = orig
        gflat[j] = (up - down) / (2.0 * eps)
    return grad


def finite_diff_grad(
    params: ModelParams, windows, targets, eps: float = 1e-5, dtype=np.longdouble
) -> Gradients:
    """Independent gradient oracle: central differences of the batch loss, per scalar.

    The perturbed forward passes run in ``dtype`` (extended precision by
    default). In float64 the loss difference bottoms out at one ulp of the
    loss, about 1e-11 in gradient units, which swamps gradients near 1e-8.
    """
    x = np.asarray(windows, dtype=dtype)
    y = np.asarray(targets, dtype=dtype).ravel()
    work = params.copy()
    for name in work:
        work.tensors[name] = work.tensors[name].astype(dtype)

    def loss() -> float:
        pred, _ = model_forward(work, x)
        if pred.shape != y.shape:
            raise ShapeError(f"{pred.shape[0]} windows but {y.size} targets")
        return np.mean((pred - y) ** 2)

    grads = {}
    for name in work:
        original = work.tensors[name]

        def loss_at(theta, name=name):
            work.tensors[name] = theta
            return loss()

        grads[name] = central_difference(loss_at, original, eps).astype(np.float64)
        work.tensors[name] = original
    return grads


def max_relative_error(a: Gradients, b: Gradients) -> float:
    """Largest ``|x - y| / max(1e-8, |x| + |y|)`` over all matching entries."""
    worst = 0.0
    for name in a:
        x, y = a[name], b[name]
        rel = np.abs(x - y) / np.maximum(1e-8, np.abs(x) + np.abs(y))
        worst = max(worst, float(rel.max(initial=0.0)))
    return worst


def adam_step(state: AdamState, params: ModelParams, grads: Gradients, hyper: AdamHyper = AdamHyper()) -> tuple[AdamState, ModelParams]:
    """One bias-corrected Adam update. ``state`` and ``params`` are updated in place and returned."""
    state.t += 1
    b1, b2 = hyper.beta1, hyper.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {params[name].shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        params.tensors[name] -= hyper.alpha * (m / c1) / (np.sqrt(v / c2) + hyper.epsilon)
    return state, params


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    dataset: WindowedDataset,
    on_epoch: Callable[[int, float, float], None] | None = None,
) -> tuple[ModelParams, list[float]]:
    """Fit a fresh model; returns the parameters and the per-epoch mean loss.

    Each epoch shuffles window order with ``shuffle_seed + epoch`` (unless
    shuffling is disabled) and applies one Adam step per batch; the final
    batch may be short. Results are a pure function of seeds, data and config.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if dataset.time_step != model_config.time_step:
        raise ShapeError(
            f"dataset time_step {dataset.time_step} != model time_step {model_config.time_step}"
        )
    x = dataset.as_model_input()
    y = np.asarray(dataset.targets, dtype=np.float64)
    params = init_params(model_config)
    state = AdamState.fresh(params)
    n = len(y)
    bs = train_config.batch_size
    history = []
    start = time.perf_counter()
    for epoch in range(train_config.epochs):
        if train_config.shuffle:
            order = np.random.default_rng(train_config.shuffle_seed + epoch).permutation(n)
        else:
            order = np.arange(n)
        total = 0.0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            loss, grads = backward(params, x[idx], y[idx])
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch + 1}")
            adam_step(state, params, grads, train_config.hyper)
            total += loss * len(idx)
        epoch_loss = total / n
        history.append(epoch_loss)
        elapsed = time.perf_counter() - start
        log.info("epoch %d/%d loss=%.6g elapsed=%.2fs", epoch + 1, train_config.epochs, epoch_loss, elapsed)
        if on_epoch is not None:
            on_epoch(epoch + 1, epoch_loss, elapsed)
    return params, history
