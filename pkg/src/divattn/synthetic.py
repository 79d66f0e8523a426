"""Synthetic feature-grid videos with planted, occludable identity parts.

Every identity owns ``parts`` signature vectors. The signature of part ``p``
is a part-type vector shared by all identities (what makes a head a "head")
plus an identity-specific vector. Part ``p`` is painted onto a
2 x 2 block of cells whose location depends only on ``p`` (so the same body
part sits in the same place for every identity), shifted per frame by up to
``jitter`` rows. Remaining cells hold background clutter drawn from a pool
shared by all identities. With probability ``p_occ`` a part is hidden in a
frame by a clutter vector from the same pool, so occlusion carries no
identity information. Part types, identity vectors and clutter have i.i.d.
normal entries with standard deviations ``part_type``, ``signal`` and
``clutter``; Gaussian noise with standard deviation ``noise`` is added to
every entry.

The first ``train_identities`` labels form the training split; the rest are
held out. Video ``v`` of an identity is recorded by camera ``v % 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import make_rng
from .errors import ConfigError


@dataclass
class SyntheticSpec:
    identities: int = 32
    train_identities: int = 16
    videos_per_identity: int = 2
    min_frames: int = 8
    frames: int = 16
    parts: int = 3
    p_occ: float = 0.0
    noise: float = 0.05
    jitter: int = 1
    part_type: float = 0.35
    signal: float = 0.35
    clutter: float = 0.35
    distractors: int = 8
    grid_h: int = 8
    grid_w: int = 4
    D: int = 64
    data_seed: int = 0

    def validate(self) -> "SyntheticSpec":
        if self.identities < 2:
            raise ConfigError("identities", "must be >= 2")
        if not 1 <= self.train_identities <= self.identities:
            raise ConfigError("train_identities", "must lie in 1..identities")
        if self.parts < 1:
            raise ConfigError("parts", "must be >= 1")
        for name in ("videos_per_identity", "min_frames", "distractors", "grid_h", "grid_w", "D"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.frames < self.min_frames:
            raise ConfigError("frames", "must be >= min_frames")
        if not 0.0 <= self.p_occ <= 1.0:
            raise ConfigError("p_occ", "must lie in [0, 1]")
        for name in ("noise", "part_type", "signal", "clutter", "jitter", "data_seed"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if self.grid_h < 2 or self.grid_w < 2:
            raise ConfigError("grid_h", "grid must be at least 2 x 2 to hold a part block")
        return self


@dataclass
class Video:
    frames: np.ndarray  # T x L x D
    label: int
    camera: int


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    videos: list[Video] = field(repr=False)
    signatures: np.ndarray = field(repr=False)  # identities x parts x D

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.spec.grid_h, self.spec.grid_w)

    def split(self, name: str) -> list[Video]:
        cut = self.spec.train_identities
        if name == "train":
            return [v for v in self.videos if v.label < cut]
        if name == "test":
            return [v for v in self.videos if v.label >= cut]
        raise ValueError(f"unknown split {name!r}")

    def probes_and_gallery(self) -> tuple[list[Video], list[Video]]:
        """Held-out videos from camera 0 probe the camera 1 gallery."""
        test = self.split("test")
        return [v for v in test if v.camera == 0], [v for v in test if v.camera != 0]

    def to_bytes(self) -> bytes:
        parts = [self.signatures.tobytes()]
        for v in self.videos:
            parts += [np.int64([v.label, v.camera]).tobytes(), v.frames.tobytes()]
        return b"".join(parts)


def part_anchors(spec: SyntheticSpec) -> list[tuple[int, int]]:
    """Top-left cell (row, col) of each part's 2 x 2 block."""
    H, W = spec.grid_h, spec.grid_w
    anchors = []
    for p in range(spec.parts):
        row = 0 if spec.parts == 1 else round(p * (H - 2) / (spec.parts - 1))
        col = 0 if p % 2 == 0 else W - 2
        anchors.append((row, col))
    return anchors


def make_synthetic(spec: SyntheticSpec, seed: int | None = None) -> SyntheticDataset:
    spec.validate()
    rng = make_rng(spec.data_seed if seed is None else seed)
    H, W, D = spec.grid_h, spec.grid_w, spec.D
    L = H * W
    types = spec.part_type * rng.standard_normal((spec.parts, D))
    signatures = types + spec.signal * rng.standard_normal((spec.identities, spec.parts, D))
    pool = spec.clutter * rng.standard_normal((spec.distractors, D))
    anchors = part_anchors(spec)

    videos = []
    for label in range(spec.identities):
        for v in range(spec.videos_per_identity):
            T = int(rng.integers(spec.min_frames, spec.frames + 1))
            grid = pool[rng.integers(0, spec.distractors, size=(T, H, W))]
            for t in range(T):
                for p, (row, col) in enumerate(anchors):
                    shift = int(rng.integers(-spec.jitter, spec.jitter + 1)) if spec.jitter else 0
                    r = min(max(row + shift, 0), H - 2)
                    occluded = spec.p_occ > 0 and rng.random() < spec.p_occ
                    vec = pool[rng.integers(0, spec.distractors)] if occluded else signatures[label, p]
                    grid[t, r : r + 2, col : col + 2] = vec
            if spec.noise > 0:
                grid = grid + spec.noise * rng.standard_normal(grid.shape)
            videos.append(Video(np.ascontiguousarray(grid.reshape(T, L, D)), label, v % 2))
    return SyntheticDataset(spec, videos, signatures)
