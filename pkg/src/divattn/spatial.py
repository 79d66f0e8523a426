"""Spatial attention heads and the receptive-field diversity penalties.

A head maps every grid cell feature ``f`` to a scalar response
``w2 . relu(W f + b) + b2``; the softmax of the responses over the grid is the
head's receptive field, and the field-weighted mean of the cell features is
the head's gated feature for that frame.

The penalties act on the K x L matrix of receptive fields of one frame:
``Q`` uses the elementwise square root (so pairwise Gram entries are
Bhattacharyya coefficients), ``Q'`` uses the raw fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import as_mat, relu, softmax_row
from .errors import InvalidPmfError, ShapeError

PMF_TOL = 1e-10


@dataclass(frozen=True)
class FrameFeatureGrid:
    """One frame's L x D cell features laid out on an ``grid_shape`` grid."""

    cells: np.ndarray
    grid_shape: tuple[int, int]

    def __post_init__(self):
        cells = as_mat(self.cells, name="cells")
        h, w = self.grid_shape
        if h * w != cells.shape[0]:
            raise ShapeError(f"grid {h}x{w} does not hold {cells.shape[0]} cells")
        if not np.all(np.isfinite(cells)):
            raise ShapeError("grid features must be finite")
        object.__setattr__(self, "cells", cells)


@dataclass
class SpatialHeadParams:
    W: np.ndarray  # d x D
    b: np.ndarray  # d
    w2: np.ndarray  # d
    b2: float

    def check(self, D: int) -> None:
        d = self.b.shape[0]
        if self.W.shape != (d, D) or self.w2.shape != (d,):
            raise ShapeError(
                f"head shapes W{self.W.shape} b{self.b.shape} w2{self.w2.shape} "
                f"do not match feature dimension {D}"
            )


def _cells(grid) -> np.ndarray:
    return grid.cells if isinstance(grid, FrameFeatureGrid) else as_mat(grid, name="grid")


def spatial_response(grid, head: SpatialHeadParams) -> np.ndarray:
    """Per-cell attention responses (length L)."""
    F = _cells(grid)
    head.check(F.shape[1])
    return relu(F @ head.W.T + head.b) @ head.w2 + float(head.b2)


def spatial_attend(grid, heads) -> tuple[np.ndarray, np.ndarray]:
    """Receptive fields ``S`` (K x L) and gated features (K x D) for one frame."""
    F = _cells(grid)
    S = np.stack([softmax_row(spatial_response(F, h)) for h in heads])
    return S, S @ F


def check_pmf_rows(S: np.ndarray, tol: float = PMF_TOL) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S[None, :]
    if np.any(S < 0) or not np.all(np.isfinite(S)):
        raise InvalidPmfError("probability mass rows must be finite and non-negative")
    if np.any(np.abs(S.sum(axis=-1) - 1.0) > tol):
        raise InvalidPmfError("probability mass rows must sum to 1")
    return S


def hellinger(p, q) -> float:
    p = check_pmf_rows(p)[0]
    q = check_pmf_rows(q)[0]
    if p.shape != q.shape:
        raise ShapeError(f"pmfs differ in length: {p.shape} vs {q.shape}")
    return float(np.linalg.norm(np.sqrt(p) - np.sqrt(q)) / np.sqrt(2.0))


def bhattacharyya(p, q) -> float:
    """Overlap ``sum sqrt(p q)``, equal to ``1 - H^2``."""
    p = check_pmf_rows(p)[0]
    q = check_pmf_rows(q)[0]
    return float(np.sum(np.sqrt(p * q)))


def diversity_q(S) -> float:
    S = check_pmf_rows(S)
    R = np.sqrt(S)
    M = R @ R.T - np.eye(S.shape[0])
    return float(np.sum(M * M))


def diversity_qprime(S) -> float:
    S = check_pmf_rows(S)
    M = S @ S.T - np.eye(S.shape[0])
    return float(np.sum(M * M))


def penalty_and_grad(S: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    """Penalty summed over frames and its gradient w.r.t. ``S`` (..., K, L).

    ``kind`` is ``"Q"``, ``"Qprime"`` or ``"none"``. For ``Q`` the square-root
    derivative uses 0 where an entry is exactly zero.
    """
    if kind == "none":
        return 0.0, np.zeros_like(S)
    K = S.shape[-2]
    eye = np.eye(K)
    if kind == "Q":
        R = np.sqrt(S)
        M = R @ np.swapaxes(R, -1, -2) - eye
        gR = 4.0 * (M @ R)
        with np.errstate(divide="ignore", invalid="ignore"):
            gS = np.where(R > 0, gR / (2.0 * R), 0.0)
    elif kind == "Qprime":
        M = S @ np.swapaxes(S, -1, -2) - eye
        gS = 4.0 * (M @ S)
    else:
        raise ValueError(f"unknown penalty kind {kind!r}")
    return float(np.sum(M * M)), gS


def mean_pairwise_bhattacharyya(S: np.ndarray) -> float:
    """Mean of ``sum_l sqrt(s_i s_j)`` over head pairs i < j and frames."""
    S = np.asarray(S)
    K = S.shape[-2]
    if K < 2:
        return 0.0
    R = np.sqrt(S)
    G = R @ np.swapaxes(R, -1, -2)
    iu = np.triu_indices(K, 1)
    return float(np.mean(G[..., iu[0], iu[1]]))


def spatial_forward(F, Ws, bs, ws2, bs2):
    """Batched forward over frames and heads, dispatched to the active kernel."""
    return kernels.spatial_forward(F, Ws, bs, ws2, bs2)
