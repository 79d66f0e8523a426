"""Mini-batch SGD training with a per-epoch metrics log."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Hyperparams, RunSettings, echo_lines
from .core import make_rng
from .errors import DegenerateVectorError, DivergenceError, FormatError
from .evaluation import Gallery, evaluate
from .io import read_feature_grid, read_video_dir
from .model import ModelParams, describe, init_params, total_loss
from .oim import OimState, oim_update
from .sampling import first_frame_sample, restricted_random_sample
from .spatial import mean_pairwise_bhattacharyya
from .synthetic import SyntheticDataset, Video, make_synthetic

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "loss", "oim_loss", "penalty", "mean_bhattacharyya", "rank1", "mAP")


@dataclass
class Splits:
    train: list[Video]
    probes: list[Video]
    gallery: list[Video]
    grid_shape: tuple[int, int]

    @property
    def identities(self) -> int:
        return max(v.label for v in self.train) + 1


def splits_from_synthetic(ds: SyntheticDataset) -> Splits:
    probes, gallery = ds.probes_and_gallery()
    return Splits(ds.split("train"), probes, gallery, ds.grid_shape)


def load_split_dir(directory) -> tuple[list[Video], tuple[int, int] | None]:
    videos, shape = [], None
    for rec in read_video_dir(directory):
        frames, grid = read_feature_grid(rec.path)
        if shape is not None and grid != shape:
            raise FormatError(f"{rec.path}: grid {grid} differs from {shape}", code="GRID_MISMATCH")
        shape = grid
        videos.append(Video(frames, rec.label, rec.camera))
    return videos, shape


def load_splits(run: RunSettings, hyper: Hyperparams) -> Splits:
    """Synthesize data, or read ``train/``, ``probes/`` and ``gallery/`` under ``run.data``."""
    if run.data == "synthetic":
        spec = run.synthetic
        spec.grid_h, spec.grid_w, spec.D = hyper.grid_h, hyper.grid_w, hyper.D
        return splits_from_synthetic(make_synthetic(spec))
    root = Path(run.data)
    train, shape = load_split_dir(root / "train")
    probes, _ = load_split_dir(root / "probes")
    gallery, _ = load_split_dir(root / "gallery")
    return Splits(train, probes, gallery, shape)


def embed_videos(videos, params: ModelParams, hyper: Hyperparams | None = None):
    """Test-time embeddings (first frame of each chunk) and receptive fields."""
    h = hyper or params.hyper
    embs, fields = [], []
    for v in videos:
        idx = first_frame_sample(v.frames.shape[0], h.N)
        desc, S, _ = describe(v.frames[idx], params, h)
        embs.append(desc.embedding)
        fields.append(S)
    return np.array(embs), fields


def retrieval_metrics(splits: Splits, params: ModelParams, hyper: Hyperparams | None = None):
    """(rank-1, mAP, mean pairwise Bhattacharyya) on the held-out split."""
    if not splits.probes or not splits.gallery:
        return float("nan"), float("nan"), float("nan")
    pe, pf = embed_videos(splits.probes, params, hyper)
    ge, gf = embed_videos(splits.gallery, params, hyper)
    probes = Gallery(pe, [v.label for v in splits.probes], [v.camera for v in splits.probes])
    gallery = Gallery(ge, [v.label for v in splits.gallery], [v.camera for v in splits.gallery])
    curve, mAP = evaluate(probes, gallery)
    bc = float(np.mean([mean_pairwise_bhattacharyya(S) for S in pf + gf]))
    return float(curve[0]), mAP, bc


@dataclass
class TrainResult:
    params: ModelParams
    state: OimState
    rows: list[dict] = field(default_factory=list)
    header: list[str] = field(default_factory=list)


class MetricsLog:
    """Append-only CSV: ``#``-prefixed config echo, column header, one row per epoch."""

    def __init__(self, path, header_lines):
        self.path = Path(path)
        with open(self.path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(",".join(METRIC_COLUMNS) + "\n")

    def append(self, row: dict) -> None:
        with open(self.path, "a") as fh:
            fh.write(format_row(row) + "\n")


def format_row(row: dict) -> str:
    return ",".join(str(row[c]) if c == "epoch" else repr(float(row[c])) for c in METRIC_COLUMNS)


def _stage_hyper(hyper: Hyperparams, epoch: int) -> Hyperparams:
    # Warmup trains spatial heads and the embedding with average temporal
    # pooling and no enhancement.
    if epoch < hyper.warmup_epochs:
        return hyper.replace(temporal_mode="average", enhancement=False)
    return hyper


def train(hyper: Hyperparams, splits: Splits, run: RunSettings | None = None,
          metrics_path=None, on_epoch=None) -> TrainResult:
    """Deterministic SGD over ``splits.train``; raises DivergenceError on a non-finite loss."""
    hyper.validate()
    if splits.grid_shape != (hyper.grid_h, hyper.grid_w):
        raise FormatError(f"data grid {splits.grid_shape} does not match config {hyper.grid_h}x{hyper.grid_w}",
                          code="GRID_MISMATCH")
    C = splits.identities
    rng = make_rng(hyper.seed)
    params = init_params(hyper, classes=C, seed=hyper.seed)
    state = OimState.zeros(C, hyper.E, hyper.tau, hyper.gamma)
    velocity = {k: np.zeros_like(v) for k, v in params.arrays.items()}
    header = ["divattn metrics"] + echo_lines(hyper, run)
    sink = MetricsLog(metrics_path, header) if metrics_path is not None else None
    result = TrainResult(params, state, header=header)

    n = len(splits.train)
    for epoch in range(hyper.epochs):
        h = _stage_hyper(hyper, epoch)
        lr = hyper.lr_at(epoch)
        order = rng.permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, hyper.batch_size):
            members = [splits.train[i] for i in order[start : start + hyper.batch_size]]
            batch = []
            for v in members:
                idx = restricted_random_sample(v.frames.shape[0], h.N, rng)
                batch.append((v.frames[idx], v.label))
            with _diverges(epoch, params, state):
                res = total_loss(batch, params, state, hyper=h, with_grads=True)
            if not np.isfinite(res.report.total):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", last_good=(params.copy(), _copy_state(state)),
                                      epoch=epoch)
            snapshot = (params.copy(), _copy_state(state))
            for name, g in res.grads.items():
                if hyper.sgd_momentum:
                    velocity[name] = hyper.sgd_momentum * velocity[name] + g
                    g = velocity[name]
                params.arrays[name] -= lr * g
            params.touch()
            if not all(np.all(np.isfinite(a)) for a in params.arrays.values()):
                raise DivergenceError(f"non-finite parameters at epoch {epoch}", last_good=snapshot, epoch=epoch)
            if hyper.loss == "oim":
                for emb, (_, label) in zip(res.embeddings, batch):
                    oim_update(state, emb, label)
            w = len(batch)
            sums += w * np.array([res.report.total, res.report.oim_loss, res.report.diversity_penalty])
        with _diverges(epoch, params, state):
            rank1, mAP, bc = retrieval_metrics(splits, params, h)
        row = dict(zip(METRIC_COLUMNS, (epoch, *(sums / n), bc, rank1, mAP)))
        result.rows.append(row)
        if sink is not None:
            sink.append(row)
        log.info("epoch %d loss %.4f rank1 %.3f mAP %.3f bc %.3f", epoch, row["loss"], rank1, mAP, bc)
        if on_epoch is not None:
            on_epoch(row)
    return result


@contextmanager
def _diverges(epoch, params, state):
    # Finite but huge parameters can overflow inside a forward pass and reach
    # the embedding normalization as NaN before any loss is formed.
    try:
        yield
    except DegenerateVectorError as exc:
        raise DivergenceError(f"non-finite forward pass at epoch {epoch}: {exc}",
                              last_good=(params.copy(), _copy_state(state)), epoch=epoch) from None


def _copy_state(state: OimState) -> OimState:
    return OimState(state.table.copy(), state.temperature, state.momentum)
