"""Dense float64 kernels used by the model: matmul, row softmax, activations.

Matrices are plain ``numpy`` arrays of dtype float64. The kernels also accept
stacked (batched) arrays where that is natural: ``softmax_rows`` and the
activations work over the last axis / element-wise, ``matmul`` follows
``numpy.matmul`` broadcasting on leading axes.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError

ACTIVATIONS = ("sigmoid", "tanh", "relu", "linear")


def matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Build a validated 2-D float64 matrix.

    A flat sequence is read in row-major order when ``rows`` and ``cols``
    are given. NaN and infinite entries are rejected.
    """
    arr = np.array(data, dtype=np.float64)
    if rows is not None or cols is not None:
        if rows is None or cols is None:
            raise ShapeError("give both rows and cols, or neither")
        if arr.size != rows * cols:
            raise ShapeError(f"{arr.size} values cannot fill a {rows}x{cols} matrix")
        arr = arr.reshape(rows, cols)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or infinite entries")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax_rows(m: np.ndarray) -> np.ndarray:
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows, and keeps sigmoid(x) + sigmoid(-x) == 1 tight
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activation(kind: str, m: np.ndarray) -> np.ndarray:
    if kind == "sigmoid":
        return sigmoid(m)
    if kind == "tanh":
        return np.tanh(m)
    if kind == "relu":
        return np.where(m < 0, 0.0, m)
    if kind == "linear":
        return m
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_grad(kind: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Derivative of ``activation(kind, ·)`` at ``pre``, given ``out`` = activation(pre)."""
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "relu":
        return (pre > 0).astype(np.float64)
    if kind == "linear":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
