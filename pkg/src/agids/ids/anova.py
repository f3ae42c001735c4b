"""One-way ANOVA F-scores and best/worst-K feature selection."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from agids.errors import SingleClass


def anova_f(matrix, labels) -> np.ndarray:
    """Per-feature one-way ANOVA F statistic.

    A feature with zero within-class variance but distinct class means gets
    ``+inf``; a feature that is constant overall gets ``0.0``.
    """
    x = np.asarray(matrix, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("matrix must be (N, F) and aligned with labels")
    classes = np.unique(y)
    n, c = x.shape[0], len(classes)
    if n < 2 or c < 2:
        raise SingleClass("ANOVA needs at least two samples from two classes")

    grand = x.mean(axis=0)
    ss_between = np.zeros(x.shape[1])
    ss_within = np.zeros(x.shape[1])
    for cls in classes:
        xc = x[y == cls]
        mean_c = xc.mean(axis=0)
        ss_between += xc.shape[0] * (mean_c - grand) ** 2
        sw = ((xc - mean_c) ** 2).sum(axis=0)
        # class means of repeated values are not always exact in floating point
        sw[xc.min(axis=0) == xc.max(axis=0)] = 0.0
        ss_within += sw
    ss_between[x.min(axis=0) == x.max(axis=0)] = 0.0

    ms_between = ss_between / (c - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ms_within = ss_within / (n - c) if n > c else np.where(ss_within > 0, np.inf, 0.0)
        f = np.where(ms_within > 0, ms_between / ms_within, np.where(ms_between > 0, np.inf, 0.0))
    return f


class Direction(str, Enum):
    BEST_K = "BestK"
    WORST_K = "WorstK"


@dataclass(frozen=True)
class FeatureSelection:
    selected: tuple[int, ...]
    scores: tuple[float, ...]
    direction: Direction
    k: int

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        return matrix[:, list(self.selected)]

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "scores": [s if np.isfinite(s) else "inf" for s in self.scores],
            "direction": self.direction.value,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> FeatureSelection:
        return cls(
            tuple(doc["selected"]),
            tuple(float(s) for s in doc["scores"]),
            Direction(doc["direction"]),
            int(doc["k"]),
        )


def select_features(scores, k: int, direction: Direction | str = Direction.BEST_K) -> FeatureSelection:
    """Indices of the k highest (BestK) or lowest (WorstK) scores; ties go to the lower index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    direction = Direction(direction)
    s = [float(v) for v in scores]
    if direction is Direction.BEST_K:
        order = sorted(range(len(s)), key=lambda j: (-s[j], j))
    else:
        order = sorted(range(len(s)), key=lambda j: (s[j], j))
    return FeatureSelection(tuple(order[: min(k, len(s))]), tuple(s), direction, k)
