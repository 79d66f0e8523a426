"""Cross-frame feature enhancement for each head's gated features.

For head k with gated features stacked as columns ``X`` (D x N):

    Phi = X^T X                                   appearance similarity
    Psi[i, j] = W_pos[i, j] * exp(-|i-j|/sigma) + b_pos[j]
    C   = row-softmax(Phi + Psi)
    Xhat = fcn_W (X C) + fcn_b 1^T + X

``W_pos`` multiplies the decay elementwise and ``b_pos`` is added to every
row. The affine map (fcn_W, fcn_b) and the positional terms are shared by
all heads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_mat, softmax, softmax_backward
from .errors import InvalidParameterError, ShapeError


@dataclass
class EnhancementParams:
    W_pos: np.ndarray  # N x N
    b_pos: np.ndarray  # N
    sigma: float
    fcn_W: np.ndarray  # D x D
    fcn_b: np.ndarray  # D

    @classmethod
    def zeros(cls, N: int, D: int, sigma: float = 2.0) -> "EnhancementParams":
        return cls(np.zeros((N, N)), np.zeros(N), sigma, np.zeros((D, D)), np.zeros(D))


def decay_matrix(N: int, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    idx = np.arange(N)
    return np.exp(-np.abs(idx[:, None] - idx[None, :]) / sigma)


def feature_similarity(Xk) -> np.ndarray:
    Xk = as_mat(Xk, name="X_k")
    return Xk.T @ Xk


def temporal_similarity(params: EnhancementParams, N: int) -> np.ndarray:
    decay = decay_matrix(N, params.sigma)
    W = as_mat(params.W_pos, N, N, name="W_pos")
    b = np.asarray(params.b_pos, dtype=np.float64)
    if b.shape != (N,):
        raise ShapeError(f"b_pos must have length {N}, got {b.shape}")
    return W * decay + b[None, :]


def contribution(Phi, Psi) -> np.ndarray:
    Phi = as_mat(Phi, name="Phi")
    Psi = as_mat(Psi, *Phi.shape, name="Psi")
    if Phi.shape[0] != Phi.shape[1]:
        raise ShapeError(f"Phi must be square, got {Phi.shape}")
    return softmax(Phi + Psi, axis=1)


def enhance(Xk, Ck, params: EnhancementParams) -> np.ndarray:
    Xk = as_mat(Xk, name="X_k")
    D, N = Xk.shape
    Ck = as_mat(Ck, N, N, name="C_k")
    fcn_W = as_mat(params.fcn_W, D, D, name="fcn_W")
    return fcn_W @ (Xk @ Ck) + np.asarray(params.fcn_b)[:, None] + Xk


# Batched form used by the model. X is (N, K, D): frame-major rows, so the
# per-head column matrix X_k of the definitions above is X[:, k, :].T.

def forward(X: np.ndarray, params: EnhancementParams):
    N, K, D = X.shape
    decay = decay_matrix(N, params.sigma)
    Psi = params.W_pos * decay + params.b_pos[None, :]
    Xh = X.transpose(1, 0, 2)  # K, N, D
    P = Xh @ Xh.transpose(0, 2, 1) + Psi[None]
    C = softmax(P, axis=-1)
    Yt = C.transpose(0, 2, 1) @ Xh  # (X_k C_k)^T per head
    Xhat = Yt @ params.fcn_W.T + params.fcn_b + Xh
    cache = (Xh, C, Yt, decay)
    return np.ascontiguousarray(Xhat.transpose(1, 0, 2)), C, cache


def backward(gXhat: np.ndarray, params: EnhancementParams, cache):
    """Returns (gX, gW_pos, gb_pos, gfcn_W, gfcn_b)."""
    Xh, C, Yt, decay = cache
    G = gXhat.transpose(1, 0, 2)  # K, N, D
    gfcn_W = np.einsum("kna,knb->ab", G, Yt)
    gfcn_b = G.sum(axis=(0, 1))
    gYt = G @ params.fcn_W
    gXh = G + C @ gYt
    gC = Xh @ gYt.transpose(0, 2, 1)
    gP = softmax_backward(C, gC, axis=-1)
    gXh = gXh + (gP + gP.transpose(0, 2, 1)) @ Xh
    gPsi = gP.sum(axis=0)
    gW_pos = gPsi * decay
    gb_pos = gPsi.sum(axis=0)
    return gXh.transpose(1, 0, 2), gW_pos, gb_pos, gfcn_W, gfcn_b
