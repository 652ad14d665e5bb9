"""Gradient alignment: the projection rule that resolves ID/OOD conflicts.

Given the classification gradient G_i and the regularization gradient G_o
(both flat over the prompt parameters), the update direction is

    G_i                                   if G_i . G_o >= 0 or ||G_o|| < eps
    G_i - (G_i . G_o / ||G_o||^2) * G_o   otherwise (obtuse angle)

so the regularizer never contributes a descent direction of its own; it only
removes the conflicting component of G_i. The alignment operates on the
whole flattened parameter vector: one dot product across all entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError

#: ||G_o|| below this means "no regularization signal"; align returns G_i.
EPS_ALIGN = 1e-12


def _pair(g_i, g_o) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(g_i, dtype=np.float64)
    b = np.asarray(g_o, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(f"gradient shapes {a.shape} vs {b.shape}")
    return a, b


def align(g_i, g_o, eps: float = EPS_ALIGN) -> np.ndarray:
    """Update direction per the rule above. Returns g_i itself in the acute
    and degenerate branches, so those cases are bitwise identities."""
    a, b = _pair(g_i, g_o)
    norm_o = float(np.sqrt(np.dot(b, b)))
    if norm_o < eps:
        return a
    d = float(np.dot(a, b))
    if d >= 0.0:
        return a
    return a - (d / (norm_o * norm_o)) * b


def decompose(g_i, g_o) -> tuple[np.ndarray, np.ndarray]:
    """Split G_i into its component along G_o and the orthogonal remainder."""
    a, b = _pair(g_i, g_o)
    norm_sq = float(np.dot(b, b))
    if norm_sq < EPS_ALIGN * EPS_ALIGN:
        raise DimensionMismatchError("cannot decompose against a degenerate G_o")
    parallel = (float(np.dot(a, b)) / norm_sq) * b
    return parallel, a - parallel


@dataclass
class ConflictStats:
    """Running instrumentation of how often and how strongly gradients conflict."""

    steps_total: int = 0
    steps_conflicting: int = 0
    _cos_sum: float = field(default=0.0, repr=False)
    _cos_count: int = field(default=0, repr=False)
    _proj_loss_sum: float = field(default=0.0, repr=False)

    @property
    def mean_cos_angle(self) -> float:
        return self._cos_sum / self._cos_count if self._cos_count else 0.0

    @property
    def mean_projection_loss(self) -> float:
        return self._proj_loss_sum / self.steps_total if self.steps_total else 0.0

    @property
    def conflict_ratio(self) -> float:
        return self.steps_conflicting / self.steps_total if self.steps_total else 0.0


def record_conflict(stats: ConflictStats, g_i, g_o, eps: float = EPS_ALIGN) -> ConflictStats:
    """Update counters for one step; conflicting means dot < 0 with a live G_o."""
    a, b = _pair(g_i, g_o)
    stats.steps_total += 1
    norm_i = float(np.sqrt(np.dot(a, a)))
    norm_o = float(np.sqrt(np.dot(b, b)))
    if norm_o < eps:
        return stats
    d = float(np.dot(a, b))
    if norm_i >= eps:
        stats._cos_sum += d / (norm_i * norm_o)
        stats._cos_count += 1
    if d < 0.0:
        stats.steps_conflicting += 1
        parallel, _ = decompose(a, b)
        stats._proj_loss_sum += float(np.sqrt(np.dot(parallel, parallel)))
    return stats
