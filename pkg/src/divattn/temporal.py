"""Per-head temporal attention, concatenation and the output embedding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_mat, l2_normalize, softmax, softmax_backward
from .errors import InvalidInputError, ShapeError

TEMPORAL_MODES = ("attention", "average", "max")
TEMPORAL_NORMS = ("softmax", "linear")


@dataclass
class TemporalHeadParams:
    w: np.ndarray  # D
    b: float


@dataclass
class EmbeddingParams:
    W: np.ndarray  # E x (K*D)
    b: np.ndarray  # E

    @property
    def dim(self) -> int:
        return self.b.shape[0]


@dataclass
class VideoDescriptor:
    per_head: np.ndarray  # K x D
    concat: np.ndarray  # K*D
    embedding: np.ndarray  # E, unit norm
    temporal_weights: np.ndarray | None = None  # N x K


def _weights(e: np.ndarray, mode: str, norm: str) -> np.ndarray:
    """Weights over frames (axis 0) from responses e (N, K)."""
    N = e.shape[0]
    if mode == "average":
        return np.full_like(e, 1.0 / N)
    if mode == "max":
        t = np.zeros_like(e)
        t[np.argmax(e, axis=0), np.arange(e.shape[1])] = 1.0
        return t
    if mode != "attention":
        raise ValueError(f"unknown temporal mode {mode!r}")
    if norm == "softmax":
        return softmax(e, axis=0)
    if norm == "linear":
        tot = e.sum(axis=0)
        if np.any(tot <= 0):
            raise InvalidInputError("linear temporal normalization needs a positive response sum")
        return e / tot
    raise ValueError(f"unknown temporal normalization {norm!r}")


def temporal_attend(Xhat_k, head: TemporalHeadParams, mode: str = "attention", norm: str = "softmax"):
    """Weights over the N columns of ``Xhat_k`` (D x N) and their weighted sum."""
    Xhat_k = as_mat(Xhat_k, name="Xhat_k")
    w = np.asarray(head.w, dtype=np.float64)
    if w.shape != (Xhat_k.shape[0],):
        raise ShapeError(f"temporal weight vector has shape {w.shape}, expected ({Xhat_k.shape[0]},)")
    e = (w @ Xhat_k + float(head.b))[:, None]
    t = _weights(e, mode, norm)[:, 0]
    return t, Xhat_k @ t


def assemble_descriptor(per_head, emb: EmbeddingParams) -> VideoDescriptor:
    per_head = np.asarray(per_head, dtype=np.float64)
    if per_head.ndim != 2:
        raise ShapeError("per-head features must be a K x D array")
    concat = per_head.reshape(-1)
    if emb.W.shape != (emb.dim, concat.size):
        raise ShapeError(f"embedding matrix {emb.W.shape} does not accept a {concat.size}-vector")
    return VideoDescriptor(per_head, concat, l2_normalize(emb.W @ concat + emb.b))


# Batched forms over all heads. Xhat is (N, K, D).

def forward(Xhat, wt, bt, mode: str, norm: str):
    r = np.einsum("nkd,kd->nk", Xhat, wt)
    e = r + bt[None, :]
    # Softmax and argmax ignore the per-head bias; evaluate them without it so
    # the weights are exactly bias-independent.
    T = _weights(e if norm == "linear" else r, mode, norm)
    xk = np.einsum("nk,nkd->kd", T, Xhat)
    return T, xk, e


def backward(gxk, Xhat, wt, T, e, mode: str, norm: str):
    """Returns (gXhat, gwt, gbt)."""
    gXhat = T[:, :, None] * gxk[None, :, :]
    if mode != "attention":
        return gXhat, np.zeros_like(wt), np.zeros(wt.shape[0])
    gT = np.einsum("kd,nkd->nk", gxk, Xhat)
    if norm == "softmax":
        ge = softmax_backward(T, gT, axis=0)
    else:
        ge = (gT - np.sum(gT * T, axis=0, keepdims=True)) / e.sum(axis=0, keepdims=True)
    gwt = np.einsum("nk,nkd->kd", ge, Xhat)
    gbt = ge.sum(axis=0)
    gXhat += ge[:, :, None] * wt[None, :, :]
    return gXhat, gwt, gbt
