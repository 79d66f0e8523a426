"""Model parameters and the full forward/backward pass for one video.

Pipeline per video (N sampled frames of L x D cell features):
spatial heads -> receptive fields and gated features -> cross-frame
enhancement -> per-head temporal attention -> concatenation -> affine
embedding -> L2 normalization -> identity loss, plus the weighted diversity
penalty summed over frames. Gradients are written out by hand.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import enhancement, kernels, temporal
from .config import Hyperparams
from .core import as_mat, glorot_uniform, l2_normalize, l2_normalize_backward, make_rng
from .enhancement import EnhancementParams
from .errors import ContractError, ShapeError
from .oim import LossReport, OimState, oim_grad, softmax_classifier_grad
from .spatial import SpatialHeadParams, mean_pairwise_bhattacharyya, penalty_and_grad
from .temporal import EmbeddingParams, TemporalHeadParams, VideoDescriptor

# Parameter arrays in checkpoint / gradient order.
PARAM_NAMES = (
    "spatial.W", "spatial.b", "spatial.w2", "spatial.b2",
    "enhance.W_pos", "enhance.b_pos", "enhance.fcn_W", "enhance.fcn_b",
    "temporal.w", "temporal.b",
    "embed.W", "embed.b",
)

GROUPS = {
    "spatial": PARAM_NAMES[0:4],
    "enhancement": PARAM_NAMES[4:8],
    "temporal": PARAM_NAMES[8:10],
    "embedding": PARAM_NAMES[10:12],
    "classifier": ("classifier.W",),
}


@dataclass
class ModelParams:
    hyper: Hyperparams
    arrays: dict
    version: int = 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> "ModelParams":
        return ModelParams(self.hyper, {k: v.copy() for k, v in self.arrays.items()}, self.version)

    def touch(self) -> None:
        """Mark the arrays as modified; outstanding forward caches go stale."""
        self.version += 1

    def check(self) -> "ModelParams":
        h = self.hyper
        expected = expected_shapes(h, self.arrays.get("classifier.W", np.zeros((0, 0))).shape[0])
        if set(expected) != set(self.arrays):
            raise ShapeError(f"parameter set {sorted(self.arrays)} does not match {sorted(expected)}")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ShapeError(f"{name} has shape {self.arrays[name].shape}, expected {shape}")
        return self

    # Views matching the per-component parameter types.
    def spatial_heads(self) -> list[SpatialHeadParams]:
        a = self.arrays
        return [
            SpatialHeadParams(a["spatial.W"][k], a["spatial.b"][k], a["spatial.w2"][k], float(a["spatial.b2"][k]))
            for k in range(self.hyper.K)
        ]

    def enhancement_params(self) -> EnhancementParams:
        a = self.arrays
        return EnhancementParams(a["enhance.W_pos"], a["enhance.b_pos"], self.hyper.sigma, a["enhance.fcn_W"], a["enhance.fcn_b"])

    def temporal_heads(self) -> list[TemporalHeadParams]:
        return [TemporalHeadParams(self["temporal.w"][k], float(self["temporal.b"][k])) for k in range(self.hyper.K)]

    def embedding_params(self) -> EmbeddingParams:
        return EmbeddingParams(self["embed.W"], self["embed.b"])


def expected_shapes(h: Hyperparams, classes: int = 0) -> dict:
    shapes = {
        "spatial.W": (h.K, h.d, h.D),
        "spatial.b": (h.K, h.d),
        "spatial.w2": (h.K, h.d),
        "spatial.b2": (h.K,),
        "enhance.W_pos": (h.N, h.N),
        "enhance.b_pos": (h.N,),
        "enhance.fcn_W": (h.D, h.D),
        "enhance.fcn_b": (h.D,),
        "temporal.w": (h.K, h.D),
        "temporal.b": (h.K,),
        "embed.W": (h.E, h.K * h.D),
        "embed.b": (h.E,),
    }
    if h.loss == "softmax":
        shapes["classifier.W"] = (classes, h.E)
    return shapes


def init_params(hyper: Hyperparams, classes: int = 0, seed: int | None = None) -> ModelParams:
    """Glorot-uniform weights and zero biases.

    The positional terms of the enhancement block start at zero, and so does
    its affine map, which makes the block an identity at initialization.
    """
    h = hyper.validate()
    rng = make_rng(h.seed if seed is None else seed)
    a = {name: np.zeros(shape) for name, shape in expected_shapes(h, classes).items()}
    a["spatial.W"] = glorot_uniform(rng, h.d, h.D, size=(h.K, h.d, h.D))
    a["spatial.w2"] = glorot_uniform(rng, 1, h.d, size=(h.K, h.d))
    a["temporal.w"] = glorot_uniform(rng, 1, h.D, size=(h.K, h.D))
    a["embed.W"] = glorot_uniform(rng, h.E, h.K * h.D)
    if h.loss == "softmax":
        a["classifier.W"] = glorot_uniform(rng, classes, h.E)
    return ModelParams(h, a)


@dataclass
class ForwardCache:
    params: ModelParams
    version: int
    hyper: Hyperparams
    grids: np.ndarray
    label: int
    state: OimState
    loss_weight: float
    spatial: tuple | None
    S: np.ndarray
    X: np.ndarray
    enh_cache: tuple | None
    C: np.ndarray | None
    Xhat: np.ndarray
    T: np.ndarray
    e_t: np.ndarray
    concat: np.ndarray
    z_norm: float
    descriptor: VideoDescriptor
    grad_penalty_S: np.ndarray
    grad_embedding: np.ndarray
    grad_classifier: np.ndarray | None


def _grids(grids, h: Hyperparams) -> np.ndarray:
    F = np.ascontiguousarray(grids, dtype=np.float64)
    if F.ndim != 3 or F.shape[1:] != (h.L, h.D):
        raise ShapeError(f"expected grids of shape (frames, {h.L}, {h.D}), got {F.shape}")
    return F


def describe(grids, params: ModelParams, hyper: Hyperparams | None = None):
    """Forward pass without a loss. Returns (descriptor, S, intermediates)."""
    h = hyper or params.hyper
    F = _grids(grids, h)
    N = F.shape[0]
    a = params.arrays

    if h.spatial_mode == "uniform":
        S = np.full((N, h.K, h.L), 1.0 / h.L)
        X = np.matmul(S, F)
        spatial = None
    else:
        spatial = kernels.spatial_forward(F, a["spatial.W"], a["spatial.b"], a["spatial.w2"], a["spatial.b2"])
        _, _, S, X = spatial

    if h.enhancement:
        if N != a["enhance.W_pos"].shape[0]:
            raise ShapeError(f"enhancement block was built for {a['enhance.W_pos'].shape[0]} frames, got {N}")
        Xhat, C, enh_cache = enhancement.forward(X, params.enhancement_params())
    else:
        Xhat, C, enh_cache = X, None, None

    T, xk, e_t = temporal.forward(Xhat, a["temporal.w"], a["temporal.b"], h.temporal_mode, h.temporal_norm)
    concat = xk.reshape(-1)
    z = a["embed.W"] @ concat + a["embed.b"]
    z_norm = float(np.sqrt(z @ z))
    emb = l2_normalize(z)
    desc = VideoDescriptor(xk, concat, emb, T)
    inter = dict(F=F, spatial=spatial, S=S, X=X, C=C, enh_cache=enh_cache, Xhat=Xhat, T=T, e_t=e_t, z_norm=z_norm)
    return desc, S, inter


def forward(grids, params: ModelParams, state: OimState, label: int,
            hyper: Hyperparams | None = None, loss_weight: float = 1.0):
    """Loss for one video and the cache ``backward`` needs."""
    h = hyper or params.hyper
    desc, S, it = describe(grids, params, h)

    if h.loss == "softmax":
        loss, p, g_emb, g_cls = softmax_classifier_grad(desc.embedding, label, params["classifier.W"])
    else:
        loss, p, g_emb = oim_grad(desc.embedding, label, state)
        g_cls = None

    if h.spatial_mode == "uniform" or h.lambda_div == 0:
        penalty, gS_pen = penalty_and_grad(S, h.penalty)[0], np.zeros_like(S)
    else:
        penalty, gS_pen = penalty_and_grad(S, h.penalty)
    total = loss_weight * loss + h.lambda_div * penalty

    report = LossReport(loss, penalty, total, p)
    cache = ForwardCache(
        params=params, version=params.version, hyper=h, grids=it["F"], label=label, state=state,
        loss_weight=loss_weight, spatial=it["spatial"], S=S, X=it["X"], enh_cache=it["enh_cache"],
        C=it["C"], Xhat=it["Xhat"], T=it["T"], e_t=it["e_t"], concat=desc.concat,
        z_norm=it["z_norm"], descriptor=desc, grad_penalty_S=h.lambda_div * gS_pen,
        grad_embedding=loss_weight * g_emb,
        grad_classifier=None if g_cls is None else loss_weight * g_cls,
    )
    return report, cache


def backward(cache: ForwardCache) -> dict:
    """Gradient of ``cache``'s total loss w.r.t. every parameter array."""
    params = cache.params
    if cache.version != params.version:
        raise ContractError("forward cache is stale: parameters changed since the forward pass")
    h = cache.hyper
    a = params.arrays
    grads = {name: np.zeros_like(arr) for name, arr in a.items()}

    g_z = l2_normalize_backward(cache.descriptor.embedding, cache.z_norm, cache.grad_embedding)
    grads["embed.W"] = np.outer(g_z, cache.concat)
    grads["embed.b"] = g_z
    if cache.grad_classifier is not None:
        grads["classifier.W"] = cache.grad_classifier
    g_xk = (a["embed.W"].T @ g_z).reshape(h.K, h.D)

    g_Xhat, grads["temporal.w"], grads["temporal.b"] = temporal.backward(
        g_xk, cache.Xhat, a["temporal.w"], cache.T, cache.e_t, h.temporal_mode, h.temporal_norm
    )

    if h.enhancement:
        g_X, gW_pos, gb_pos, gfcn_W, gfcn_b = enhancement.backward(g_Xhat, params.enhancement_params(), cache.enh_cache)
        grads["enhance.W_pos"], grads["enhance.b_pos"] = gW_pos, gb_pos
        grads["enhance.fcn_W"], grads["enhance.fcn_b"] = gfcn_W, gfcn_b
    else:
        g_X = g_Xhat

    if h.spatial_mode != "uniform":
        H, _, S, _ = cache.spatial
        gWs, gbs, gws2, gbs2 = kernels.spatial_backward(
            cache.grids, a["spatial.W"], a["spatial.w2"], H, S, g_X, cache.grad_penalty_S
        )
        grads["spatial.W"], grads["spatial.b"] = gWs, gbs
        grads["spatial.w2"], grads["spatial.b2"] = gws2, gbs2
    return grads


def video_loss(grids, params, state, label, hyper=None, loss_weight=1.0) -> float:
    return forward(grids, params, state, label, hyper, loss_weight)[0].total


@dataclass
class BatchResult:
    report: LossReport
    grads: dict
    embeddings: list
    mean_bc: float


def total_loss(batch, params: ModelParams, state: OimState, lambda_div: float | None = None,
               hyper: Hyperparams | None = None, with_grads: bool = False) -> BatchResult:
    """Mean over ``batch`` (pairs of grids and label) of loss + lambda * penalty."""
    batch = list(batch)
    if not batch:
        raise ShapeError("batch must not be empty")
    h = hyper or params.hyper
    if lambda_div is not None:
        h = dataclasses.replace(h, lambda_div=lambda_div)
    n = len(batch)
    oim_sum = pen_sum = tot_sum = bc_sum = 0.0
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays.items()} if with_grads else None
    embeddings, probs = [], []
    for grids, label in batch:
        report, cache = forward(grids, params, state, label, h)
        oim_sum += report.oim_loss
        pen_sum += report.diversity_penalty
        tot_sum += report.total
        bc_sum += mean_pairwise_bhattacharyya(cache.S)
        embeddings.append(cache.descriptor.embedding)
        probs.append(report.probabilities)
        if with_grads:
            for name, g in backward(cache).items():
                grads[name] += g
    if with_grads:
        for g in grads.values():
            g /= n
    report = LossReport(oim_sum / n, pen_sum / n, tot_sum / n, np.mean(probs, axis=0))
    return BatchResult(report, grads, embeddings, bc_sum / n)


def mean_pool_baseline_loss(grids, W_e, b_e, state: OimState, label: int) -> float:
    """Directly coded baseline: average all cells of all frames, embed, score."""
    F = np.asarray(grids, dtype=np.float64)
    pooled = F.mean(axis=(0, 1))
    emb = l2_normalize(as_mat(W_e, name="W_e") @ pooled + b_e)
    logits = state.table @ emb / state.temperature
    m = logits.max()
    return float(m + np.log(np.sum(np.exp(logits - m))) - logits[label])
