"""Dense numeric helpers shared by every stage of the pipeline.

Matrices are plain C-ordered ``float64`` numpy arrays. Randomness comes from
numpy's PCG64 bit generator (``numpy.random.Generator(PCG64(seed))``), the
single generator used everywhere so seeded runs replay identically.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateVectorError, InvalidInputError, ShapeError

EPS_NORM = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Return the project's generator (PCG64) for a 64-bit unsigned seed."""
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def as_mat(a, rows=None, cols=None, name="matrix") -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"{name} must have {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"{name} must have {cols} columns, got {m.shape[1]}")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax_row(v) -> np.ndarray:
    """Numerically stable softmax of a 1-D vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInputError("softmax_row expects a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("softmax_row input contains non-finite values")
    z = np.exp(v - v.max())
    return z / z.sum()


def softmax(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis``; no validation, for internal hot paths."""
    z = np.exp(a - a.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def softmax_backward(p: np.ndarray, grad_p: np.ndarray, axis: int = -1) -> np.ndarray:
    """Gradient w.r.t. softmax logits given output ``p`` and upstream ``grad_p``."""
    return p * (grad_p - np.sum(grad_p * p, axis=axis, keepdims=True))


def relu(v) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def l2_normalize(v, eps: float = EPS_NORM) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.sqrt(np.dot(v, v)))
    if not norm > eps:
        raise DegenerateVectorError(f"cannot normalize vector with norm {norm:.3e}")
    return v / norm


def l2_normalize_backward(unit: np.ndarray, norm: float, grad_unit: np.ndarray) -> np.ndarray:
    """Gradient through ``v / |v|`` given the normalized output and ``|v|``."""
    return (grad_unit - unit * np.dot(unit, grad_unit)) / norm


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int, size=None) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=size if size is not None else (fan_out, fan_in))
