# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled spatial-attention kernels; same contract as ``_kernels_py``.

The two dense projections (cells onto hidden units, and the weight gradient)
go through numpy's matmul so they hit BLAS. Everything per cell, the ReLU,
scoring, softmax, gating and the masked backward scatter, is fused here in
C loops without the GIL or any temporaries.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def spatial_forward(double[:, :, ::1] F, double[:, :, ::1] Ws, double[:, ::1] bs,
                    double[:, ::1] ws2, double[::1] bs2):
    cdef Py_ssize_t N = F.shape[0], L = F.shape[1], D = F.shape[2]
    cdef Py_ssize_t K = Ws.shape[0], d = Ws.shape[1]
    cdef Py_ssize_t n, k, l, j, c
    cdef double mx, tot, s, h, p

    F_arr = np.asarray(F)
    # (N*L, D) @ (D, K*d) in one BLAS call, then laid out as (N, K, L, d).
    P = (F_arr.reshape(N * L, D) @ np.asarray(Ws).reshape(K * d, D).T).reshape(N, L, K, d)
    H_arr = np.ascontiguousarray(P.transpose(0, 2, 1, 3))
    E_arr = np.empty((N, K, L))
    S_arr = np.empty((N, K, L))
    X_arr = np.zeros((N, K, D))
    R_arr = np.empty(L)
    cdef double[:, :, :, ::1] H = H_arr
    cdef double[:, :, ::1] E = E_arr
    cdef double[:, :, ::1] S = S_arr
    cdef double[:, :, ::1] X = X_arr
    cdef double[::1] R = R_arr

    with nogil:
        for n in range(N):
            for k in range(K):
                for l in range(L):
                    s = 0.0
                    for j in range(d):
                        h = H[n, k, l, j] + bs[k, j]
                        H[n, k, l, j] = h
                        if h > 0:
                            s = s + ws2[k, j] * h
                    # The head bias cancels in the softmax; keeping it out of
                    # R makes S exactly independent of it.
                    R[l] = s
                    E[n, k, l] = s + bs2[k]
                mx = R[0]
                for l in range(1, L):
                    if R[l] > mx:
                        mx = R[l]
                tot = 0.0
                for l in range(L):
                    S[n, k, l] = exp(R[l] - mx)
                    tot = tot + S[n, k, l]
                for l in range(L):
                    p = S[n, k, l] / tot
                    S[n, k, l] = p
                    for c in range(D):
                        X[n, k, c] = X[n, k, c] + p * F[n, l, c]
    return H_arr, E_arr, S_arr, X_arr


def spatial_backward(double[:, :, ::1] F, double[:, :, ::1] Ws, double[:, ::1] ws2,
                     double[:, :, :, ::1] H, double[:, :, ::1] S,
                     double[:, :, ::1] gX, double[:, :, ::1] gS):
    cdef Py_ssize_t N = F.shape[0], L = F.shape[1], D = F.shape[2]
    cdef Py_ssize_t K = Ws.shape[0], d = Ws.shape[1]
    cdef Py_ssize_t n, k, l, j
    cdef double dot, g, h, a

    F_arr = np.asarray(F)
    # Upstream gradient on S from the gated features: gX @ F^T per frame.
    G_arr = np.ascontiguousarray(np.asarray(gS) + np.matmul(np.asarray(gX), F_arr.transpose(0, 2, 1)))
    GA_arr = np.zeros((N, L, K, d))
    gbs_arr = np.zeros((K, d))
    gws2_arr = np.zeros((K, d))
    gbs2_arr = np.zeros(K)
    cdef double[:, :, ::1] G = G_arr
    cdef double[:, :, :, ::1] GA = GA_arr
    cdef double[:, ::1] gbs = gbs_arr
    cdef double[:, ::1] gws2 = gws2_arr
    cdef double[::1] gbs2 = gbs2_arr

    with nogil:
        for n in range(N):
            for k in range(K):
                dot = 0.0
                for l in range(L):
                    dot = dot + G[n, k, l] * S[n, k, l]
                for l in range(L):
                    g = S[n, k, l] * (G[n, k, l] - dot)
                    gbs2[k] = gbs2[k] + g
                    for j in range(d):
                        h = H[n, k, l, j]
                        if h > 0:
                            a = g * ws2[k, j]
                            gws2[k, j] = gws2[k, j] + g * h
                            gbs[k, j] = gbs[k, j] + a
                            GA[n, l, k, j] = a
    # gWs[k, j, :] = sum over (n, l) of GA[n, l, k, j] F[n, l, :], one BLAS call.
    gWs_arr = (GA_arr.reshape(N * L, K * d).T @ F_arr.reshape(N * L, D)).reshape(K, d, D)
    return gWs_arr, gbs_arr, gws2_arr, gbs2_arr
