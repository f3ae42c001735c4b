"""CART decision tree (Gini impurity) with deterministic tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np

from agids.errors import EmptyTraining, UsageError, WidthMismatch
from agids.flows import ClassLabel


@dataclass(frozen=True)
class TreeHyperparams:
    max_depth: int = 20
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    criterion: str = "gini"

    def __post_init__(self):
        if self.max_depth < 1 or self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise UsageError(f"invalid tree hyperparameters: {self}")
        if self.criterion != "gini":
            raise UsageError("only the Gini criterion is supported")

    @classmethod
    def from_dict(cls, doc: dict) -> TreeHyperparams:
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown tree hyperparameters: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "criterion": self.criterion,
        }


@dataclass(frozen=True)
class Leaf:
    class_counts: tuple[int, ...]
    predicted: int


@dataclass(frozen=True)
class Split:
    feature_idx: int
    threshold: float
    left: Node
    right: Node


Node = Union[Leaf, Split]


def _leaf(counts: np.ndarray) -> Leaf:
    # np.argmax returns the first maximum, i.e. the earliest declared class
    return Leaf(tuple(int(c) for c in counts), int(np.argmax(counts)))


@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    root: Node
    hyperparams: TreeHyperparams
    n_features: int
    n_classes: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DecisionTreeModel):
            return NotImplemented
        return (self.root, self.hyperparams, self.n_features, self.n_classes) == (
            other.root,
            other.hyperparams,
            other.n_features,
            other.n_classes,
        )

    __hash__ = None

    @property
    def depth(self) -> int:
        def walk(node: Node) -> int:
            return 0 if isinstance(node, Leaf) else 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    @property
    def n_leaves(self) -> int:
        return len(self._flat[4])

    @cached_property
    def _flat(self):
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node: Node) -> int:
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(-1)
            if isinstance(node, Leaf):
                value[i] = node.predicted
            else:
                feature[i] = node.feature_idx
                threshold[i] = node.threshold
                left[i] = add(node.left)
                right[i] = add(node.right)
            return i

        add(self.root)
        leaves = [v for v in value if v >= 0]
        return (
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            leaves,
            np.array(value, dtype=np.int64),
        )

    def predict(self, matrix) -> np.ndarray:
        return predict(self, matrix)

    def to_dict(self) -> dict:
        def node_dict(node: Node) -> dict:
            if isinstance(node, Leaf):
                return {"class_counts": list(node.class_counts), "predicted": ClassLabel(node.predicted).display}
            return {
                "feature": node.feature_idx,
                "threshold": node.threshold,
                "left": node_dict(node.left),
                "right": node_dict(node.right),
            }

        return {
            "hyperparams": self.hyperparams.to_dict(),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "root": node_dict(self.root),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> DecisionTreeModel:
        def parse(d: dict) -> Node:
            if "class_counts" in d:
                return Leaf(tuple(d["class_counts"]), int(ClassLabel.parse(d["predicted"])))
            return Split(int(d["feature"]), float(d["threshold"]), parse(d["left"]), parse(d["right"]))

        return cls(parse(doc["root"]), TreeHyperparams.from_dict(doc["hyperparams"]), doc["n_features"], doc["n_classes"])


def _midpoint(a: float, b: float) -> float:
    mid = (a + b) / 2.0
    if not np.isfinite(mid):
        mid = a / 2.0 + b / 2.0
    # rounding can land on b, which would send b to the left child
    return a if mid >= b else mid


def best_split(x: np.ndarray, y: np.ndarray, n_classes: int, min_samples_leaf: int = 1) -> tuple[int, float] | None:
    """Return the (feature, threshold) minimizing weighted child Gini impurity.

    Candidates are midpoints between consecutive distinct values.  Minimizing
    weighted Gini is the same as maximizing sum(L_c^2)/n_L + sum(R_c^2)/n_R;
    floating point picks the near-best candidates and exact rational
    arithmetic settles them, ties going to the lowest feature then threshold.
    """
    n, n_feat = x.shape
    if n < 2 * min_samples_leaf:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]
    onehot = ys[:, :, None] == np.arange(n_classes)
    left = np.cumsum(onehot, axis=0, dtype=np.int64)[:-1]
    right = np.bincount(y, minlength=n_classes) - left
    n_left = np.arange(1, n, dtype=np.int64)[:, None]
    n_right = n - n_left
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    if not valid.any():
        return None
    sq_left = (left.astype(np.float64) ** 2).sum(axis=2)
    sq_right = (right.astype(np.float64) ** 2).sum(axis=2)
    score = np.where(valid, sq_left / n_left + sq_right / n_right, -np.inf)
    top = score.max()
    near = np.argwhere(score >= top - 1e-9 * top)

    best_key = None
    best = None
    for i, f in near:
        nl, nr = int(n_left[i, 0]), n - int(n_left[i, 0])
        sl = sum(int(v) ** 2 for v in left[i, f])
        sr = sum(int(v) ** 2 for v in right[i, f])
        exact = Fraction(sl * nr + sr * nl, nl * nr)
        key = (-exact, int(f), int(i))
        if best_key is None or key < best_key:
            best_key = key
            best = (int(f), _midpoint(float(xs[i, f]), float(xs[i + 1, f])))
    return best


def train_tree(matrix, labels, hp: TreeHyperparams | None = None, seed: int = 0, *, n_classes: int | None = None) -> DecisionTreeModel:
    """Grow a CART tree greedily.

    A node becomes a leaf once it is pure, holds fewer than
    ``min_samples_split`` samples, sits at ``max_depth``, or has no split
    leaving ``min_samples_leaf`` samples on each side.  Zero-gain splits are
    allowed.  ``seed`` is accepted for API symmetry; growth is deterministic.
    """
    hp = hp or TreeHyperparams()
    x = np.ascontiguousarray(matrix, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyTraining("training matrix is empty")
    if x.shape[0] != y.shape[0]:
        raise ValueError("matrix and labels are not aligned")
    if not np.isfinite(x).all():
        raise ValueError("training matrix must be finite")
    n_classes = n_classes or max(len(ClassLabel), int(y.max()) + 1)

    def grow(idx: np.ndarray, depth: int) -> Node:
        counts = np.bincount(y[idx], minlength=n_classes)
        if depth >= hp.max_depth or len(idx) < hp.min_samples_split or np.count_nonzero(counts) == 1:
            return _leaf(counts)
        found = best_split(x[idx], y[idx], n_classes, hp.min_samples_leaf)
        if found is None:
            return _leaf(counts)
        f, thr = found
        to_left = x[idx, f] <= thr
        return Split(f, thr, grow(idx[to_left], depth + 1), grow(idx[~to_left], depth + 1))

    root = grow(np.arange(x.shape[0]), 0)
    return DecisionTreeModel(root, hp, x.shape[1], n_classes)


def predict(model: DecisionTreeModel, matrix) -> np.ndarray:
    """Route rows through the tree; ``value <= threshold`` goes left."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim == 1 and x.size == 0:
        return np.zeros(0, dtype=np.int64)
    if x.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if x.shape[1] != model.n_features:
        if x.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        raise WidthMismatch(model.n_features, x.shape[1])
    feature, threshold, left, right, _, value = model._flat
    node = np.zeros(x.shape[0], dtype=np.int64)
    while True:
        rows = np.flatnonzero(feature[node] >= 0)
        if rows.size == 0:
            break
        cur = node[rows]
        go_left = x[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
    return value[node]
