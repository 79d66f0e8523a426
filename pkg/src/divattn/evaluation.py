"""Retrieval metrics: ranked lists, CMC curves and mean average precision."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ProtocolError, ShapeError


@dataclass
class Gallery:
    embeddings: np.ndarray  # M x E, unit rows
    labels: np.ndarray  # M
    camera_ids: np.ndarray | None = None

    def __post_init__(self):
        self.embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=np.float64))
        self.labels = np.asarray(self.labels)
        if self.camera_ids is not None:
            self.camera_ids = np.asarray(self.camera_ids)
            if self.camera_ids.shape[0] != self.labels.shape[0]:
                raise ShapeError("camera_ids and labels differ in length")
        if self.embeddings.shape[0] != self.labels.shape[0]:
            raise ShapeError("embeddings and labels differ in length")

    def __len__(self) -> int:
        return self.labels.shape[0]


def rank_list(probe, gallery: Gallery) -> np.ndarray:
    """Gallery indices by descending cosine similarity, ties by index."""
    if len(gallery) == 0:
        raise InvalidInputError("gallery is empty")
    sims = gallery.embeddings @ np.asarray(probe, dtype=np.float64)
    return np.lexsort((np.arange(len(gallery)), -sims))


def _ranked_matches(probe, label, camera, gallery: Gallery) -> np.ndarray:
    order = rank_list(probe, gallery)
    if camera is not None and gallery.camera_ids is not None:
        keep = ~((gallery.labels[order] == label) & (gallery.camera_ids[order] == camera))
        order = order[keep]
    matches = gallery.labels[order] == label
    if not matches.any():
        raise ProtocolError(f"probe identity {label} has no admissible match in the gallery")
    return matches


def _probe_iter(probes: Gallery, gallery: Gallery):
    cams = probes.camera_ids
    for i in range(len(probes)):
        yield _ranked_matches(probes.embeddings[i], probes.labels[i], None if cams is None else cams[i], gallery)


def cmc(probes: Gallery, gallery: Gallery, k_max: int | None = None) -> np.ndarray:
    """``curve[k-1]`` = fraction of probes whose first true match is within rank k."""
    k_max = len(gallery) if k_max is None else int(k_max)
    curve = np.zeros(k_max)
    n = 0
    for matches in _probe_iter(probes, gallery):
        first = int(np.argmax(matches))
        if first < k_max:
            curve[first:] += 1
        n += 1
    if n == 0:
        raise InvalidInputError("no probes")
    return curve / n


# Averages use math.fsum (correctly rounded), so the result does not depend on
# summation order.

def average_precision(matches: np.ndarray) -> float:
    hits = np.flatnonzero(matches)
    return math.fsum((np.arange(1, hits.size + 1) / (hits + 1)).tolist()) / hits.size


def mean_ap(probes: Gallery, gallery: Gallery) -> float:
    aps = [average_precision(m) for m in _probe_iter(probes, gallery)]
    if not aps:
        raise InvalidInputError("no probes")
    return math.fsum(aps) / len(aps)


def evaluate(probes: Gallery, gallery: Gallery, k_max: int | None = None) -> tuple[np.ndarray, float]:
    return cmc(probes, gallery, k_max), mean_ap(probes, gallery)
