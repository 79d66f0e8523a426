"""Binary and text file formats.

Checkpoint (all integers u32 little-endian, values f64 little-endian)::

    b"DVAT" | version | len | hyperparameter text (key = value lines)
    | array count | per array: name len, name, ndim, dims..., values
    | u64 checksum

The checksum is the sum, modulo 2**64, of the IEEE-754 bit patterns of every
stored value plus the little-endian u64 words of all other bytes before it
(magic, lengths, text, names, dims; concatenated and zero-padded to a
multiple of 8). Any single flipped byte therefore changes the sum. The OIM table is stored as array ``oim.table`` with its
temperature and momentum as 0-d arrays.

Feature-grid file: ``frames, grid_h, grid_w, D`` (u32) followed by
frames x cells x D values, frame-major then cell-major.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Hyperparams, hyper_from_text, hyper_to_text
from .errors import ChecksumError, ConfigError, FormatError
from .model import ModelParams
from .oim import OimState

MAGIC = b"DVAT"
VERSION = 1
LABELS_FILE = "labels.csv"


@dataclass
class Checkpoint:
    params: ModelParams
    state: OimState

    @property
    def hyper(self) -> Hyperparams:
        return self.params.hyper


def _checksum(values: np.ndarray) -> int:
    return int(np.sum(values.view("<u8"), dtype=np.uint64))


def _header_checksum(header: bytes) -> int:
    padded = header + b"\0" * (-len(header) % 8)
    return int(np.sum(np.frombuffer(padded, dtype="<u8"), dtype=np.uint64))


def checkpoint_bytes(params: ModelParams, state: OimState) -> bytes:
    arrays = dict(params.arrays)
    arrays["oim.table"] = state.table
    arrays["oim.temperature"] = np.array(state.temperature)
    arrays["oim.momentum"] = np.array(state.momentum)
    hyper = hyper_to_text(params.hyper).encode()
    header = [MAGIC, struct.pack("<II", VERSION, len(hyper)), hyper, struct.pack("<I", len(arrays))]
    out = list(header)
    total = 0
    for name, arr in arrays.items():
        values = np.array(arr, dtype="<f8", order="C")  # keeps 0-d arrays 0-d
        raw = name.encode()
        meta = struct.pack("<I", len(raw)) + raw + struct.pack(f"<I{values.ndim}I", values.ndim, *values.shape)
        header.append(meta)
        out += [meta, values.tobytes()]
        total = (total + _checksum(values.reshape(-1))) % 2**64
    total = (total + _header_checksum(b"".join(header))) % 2**64
    out.append(struct.pack("<Q", total))
    return b"".join(out)


def save_checkpoint(path, params: ModelParams, state: OimState) -> None:
    Path(path).write_bytes(checkpoint_bytes(params, state))


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0
        self.header = []  # every non-value chunk, for the checksum

    def take(self, n: int, value: bool = False) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint is truncated", code="TRUNCATED")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        if not value:
            self.header.append(chunk)
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u32s(self, count: int) -> tuple:
        return struct.unpack(f"<{count}I", self.take(4 * count))


def parse_checkpoint(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("not a checkpoint (bad magic)", code="BAD_MAGIC")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", code="BAD_VERSION")
    try:
        hyper = hyper_from_text(r.take(r.u32()).decode())
    except (UnicodeDecodeError, ConfigError) as exc:
        raise FormatError(f"corrupt hyperparameter block: {exc}", code="BAD_HEADER") from None
    count = r.u32()
    arrays, total = {}, 0
    for _ in range(count):
        try:
            name = r.take(r.u32()).decode()
        except UnicodeDecodeError:
            raise FormatError("corrupt array name", code="BAD_HEADER") from None
        ndim = r.u32()
        if ndim > 8:
            raise FormatError(f"array {name!r} claims {ndim} dimensions", code="BAD_HEADER")
        shape = r.u32s(ndim)
        size = math.prod(shape)
        values = np.frombuffer(r.take(8 * size, value=True), dtype="<f8")
        total = (total + _checksum(values)) % 2**64
        try:
            arrays[name] = values.astype(np.float64).reshape(shape)
        except ValueError:
            raise FormatError(f"array {name!r} has impossible shape {shape}", code="BAD_HEADER") from None
    total = (total + _header_checksum(b"".join(r.header))) % 2**64
    (stored,) = struct.unpack("<Q", r.take(8, value=True))
    if r.pos != len(data):
        raise FormatError("trailing bytes after checksum", code="TRAILING")
    if stored != total:
        raise ChecksumError(f"checksum mismatch: stored {stored:#018x}, computed {total:#018x}")
    try:
        table = arrays.pop("oim.table")
        temperature, momentum = arrays.pop("oim.temperature"), arrays.pop("oim.momentum")
        if temperature.shape != () or momentum.shape != ():
            raise ValueError("OIM temperature and momentum must be scalars")
        state = OimState(table, float(temperature), float(momentum))
        params = ModelParams(hyper, arrays).check()
    except (KeyError, ValueError) as exc:
        raise FormatError(f"checkpoint content is inconsistent: {exc}", code="BAD_CONTENT") from None
    return Checkpoint(params, state)


def load_checkpoint(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}", code="IO") from None
    return parse_checkpoint(data)


# Feature grids.

def feature_grid_bytes(frames: np.ndarray, grid_shape: tuple[int, int]) -> bytes:
    frames = np.ascontiguousarray(frames, dtype="<f8")
    T, L, D = frames.shape
    h, w = grid_shape
    if h * w != L:
        raise FormatError(f"grid {h}x{w} does not match {L} cells")
    return struct.pack("<4I", T, h, w, D) + frames.tobytes()


def write_feature_grid(path, frames: np.ndarray, grid_shape: tuple[int, int]) -> None:
    Path(path).write_bytes(feature_grid_bytes(frames, grid_shape))


def read_feature_grid(path) -> tuple[np.ndarray, tuple[int, int]]:
    """Returns (frames x cells x D array, (grid_h, grid_w))."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}", code="IO") from None
    if len(data) < 16:
        raise FormatError(f"{path}: feature grid header is truncated", code="TRUNCATED")
    T, h, w, D = struct.unpack("<4I", data[:16])
    expected = 16 + 8 * T * h * w * D
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}", code="BAD_LENGTH")
    frames = np.frombuffer(data, dtype="<f8", offset=16).astype(np.float64).reshape(T, h * w, D)
    if not np.all(np.isfinite(frames)):
        raise FormatError(f"{path}: non-finite feature values", code="NON_FINITE")
    return frames, (h, w)


# Dataset directories: one .grid file per video plus labels.csv
# (columns file, label, camera).

@dataclass
class VideoRecord:
    path: Path
    label: int
    camera: int


def write_video_dir(directory, videos, grid_shape) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / LABELS_FILE, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file", "label", "camera"])
        for i, v in enumerate(videos):
            name = f"video_{i:05d}.grid"
            write_feature_grid(directory / name, v.frames, grid_shape)
            writer.writerow([name, v.label, v.camera])


def read_video_dir(directory) -> list[VideoRecord]:
    directory = Path(directory)
    try:
        with open(directory / LABELS_FILE, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {directory / LABELS_FILE}: {exc.strerror}", code="IO") from None
    try:
        return [VideoRecord(directory / r["file"], int(r["label"]), int(r["camera"])) for r in rows]
    except (KeyError, TypeError, ValueError):
        raise FormatError(f"{directory / LABELS_FILE}: malformed row", code="BAD_LABELS") from None


# Attention exports.

def heatmap_rows(S: np.ndarray) -> list[list]:
    """One row per (frame, head): n, k, then the L cell weights."""
    N, K, _ = S.shape
    return [[n, k, *S[n, k]] for n in range(N) for k in range(K)]


def write_heatmap_csv(path, S: np.ndarray) -> None:
    L = S.shape[2]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "head"] + [f"cell{l}" for l in range(L)])
        for row in heatmap_rows(S):
            writer.writerow(row[:2] + [repr(float(x)) for x in row[2:]])


def pgm_text(field: np.ndarray, grid_shape: tuple[int, int]) -> str:
    """Plain (P2) greyscale image of one receptive field, value ``round(255 s)``."""
    h, w = grid_shape
    pix = np.rint(np.asarray(field).reshape(h, w) * 255).astype(int)
    lines = ["P2", f"{w} {h}", "255"] + [" ".join(map(str, row)) for row in pix]
    return "\n".join(lines) + "\n"


def read_pgm(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines() if not line.startswith("#") for t in line.split()]
    if not tokens or tokens[0] != "P2":
        raise FormatError(f"{path}: not a plain PGM", code="BAD_PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array(tokens[4 : 4 + w * h], dtype=float).reshape(h, w) / maxval


def write_temporal_csv(path, T: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"head{k}" for k in range(T.shape[1])])
        for row in T:
            writer.writerow([repr(float(x)) for x in row])
