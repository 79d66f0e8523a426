"""Online instance matching against a lookup table of identity features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import l2_normalize, softmax
from .errors import InvalidInputError, InvalidLabelError


@dataclass
class OimState:
    """C x E table, one running unit feature per training identity.

    Rows start at zero (similarity 0) and become unit vectors on the first
    update of their identity.
    """

    table: np.ndarray
    temperature: float = 0.1
    momentum: float = 0.5

    def __post_init__(self):
        self.table = np.array(self.table, dtype=np.float64)
        if self.table.ndim != 2 or self.table.shape[0] < 2:
            raise InvalidInputError("lookup table needs at least two identity rows")
        if not self.temperature > 0:
            raise InvalidInputError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError(f"momentum must lie in [0, 1), got {self.momentum}")

    @classmethod
    def zeros(cls, identities: int, dim: int, temperature: float = 0.1, momentum: float = 0.5):
        return cls(np.zeros((identities, dim)), temperature, momentum)

    @property
    def identities(self) -> int:
        return self.table.shape[0]


@dataclass
class LossReport:
    oim_loss: float
    diversity_penalty: float
    total: float
    probabilities: np.ndarray = field(repr=False)


def _check_label(label: int, C: int) -> int:
    label = int(label)
    if not 0 <= label < C:
        raise InvalidLabelError(f"label {label} outside [0, {C})")
    return label


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """``-log softmax(logits)[label]``, accurate when the label dominates."""
    rel = logits - logits[label]
    rel[label] = -np.inf
    top = rel.max()
    if top <= 0:
        return float(np.log1p(np.sum(np.exp(rel))))
    return float(top + np.log(np.exp(-top) + np.sum(np.exp(rel - top))))


def oim_forward(embedding, label: int, state: OimState) -> tuple[float, np.ndarray]:
    label = _check_label(label, state.identities)
    logits = state.table @ np.asarray(embedding, dtype=np.float64) / state.temperature
    return cross_entropy(logits, label), softmax(logits)


def oim_grad(embedding, label: int, state: OimState):
    """Loss, probabilities and d(loss)/d(embedding); the table is held constant."""
    loss, p = oim_forward(embedding, label, state)
    g = p.copy()
    g[label] -= 1.0
    return loss, p, state.table.T @ g / state.temperature


def oim_update(state: OimState, embedding, label: int) -> OimState:
    """Move the label's row toward ``embedding`` and renormalize, in place."""
    label = _check_label(label, state.identities)
    row = state.momentum * state.table[label] + (1.0 - state.momentum) * np.asarray(embedding)
    state.table[label] = l2_normalize(row)
    return state


def softmax_classifier_grad(embedding, label: int, weights: np.ndarray):
    """Plain softmax classification with a learned C x E weight matrix.

    Returns loss, probabilities, d/d(embedding), d/d(weights).
    """
    label = _check_label(label, weights.shape[0])
    logits = weights @ embedding
    p = softmax(logits)
    g = p.copy()
    g[label] -= 1.0
    return cross_entropy(logits, label), p, weights.T @ g, np.outer(g, embedding)
