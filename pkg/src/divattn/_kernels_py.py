"""Pure numpy spatial-attention kernels (fallback when the extension is absent).

Shapes: F (N, L, D) cell features per frame, Ws (K, d, D), bs (K, d),
ws2 (K, d), bs2 (K,). Outputs are indexed (frame, head, cell, ...).
"""

import numpy as np


def spatial_forward(F, Ws, bs, ws2, bs2):
    N, L, D = F.shape
    K, d, _ = Ws.shape
    H = (F.reshape(N * L, D) @ Ws.reshape(K * d, D).T).reshape(N, L, K, d)
    H = H.transpose(0, 2, 1, 3) + bs[None, :, None, :]
    A = np.maximum(H, 0.0)
    R = np.einsum("nklj,kj->nkl", A, ws2)
    E = R + bs2[None, :, None]
    # The per-head bias cancels in the softmax; leaving it out keeps S exactly
    # independent of it in floating point.
    Z = np.exp(R - R.max(axis=-1, keepdims=True))
    S = Z / Z.sum(axis=-1, keepdims=True)
    X = np.matmul(S, F)
    c = np.ascontiguousarray
    return c(H), c(E), c(S), c(X)


def spatial_backward(F, Ws, ws2, H, S, gX, gS):
    N, L, D = F.shape
    K, d, _ = Ws.shape
    gS = gS + np.matmul(gX, F.transpose(0, 2, 1))
    gE = S * (gS - np.sum(gS * S, axis=-1, keepdims=True))
    A = np.maximum(H, 0.0)
    gws2 = np.einsum("nkl,nklj->kj", gE, A)
    gbs2 = gE.sum(axis=(0, 2))
    gH = gE[..., None] * ws2[None, :, None, :]
    gH *= H > 0
    gbs = gH.sum(axis=(0, 2))
    gWs = (gH.transpose(1, 3, 0, 2).reshape(K * d, N * L) @ F.reshape(N * L, D)).reshape(K, d, D)
    return gWs, gbs, gws2, gbs2
