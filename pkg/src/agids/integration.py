"""Couplings between attack graphs and the IDS.

Two directions are supported: path existence injected as an extra training
feature, and post-hoc refinement that flips attack predictions lacking a
supporting attack path back to Benign.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from agids.errors import LengthMismatch, WidthMismatch
from agids.flows import ClassLabel, Dataset
from agids.graph import AttackGraph
from agids.ids.anova import FeatureSelection
from agids.ids.metrics import Metrics, MetricsDelta, delta, evaluate
from agids.ids.tree import DecisionTreeModel, TreeHyperparams, train_tree

log = logging.getLogger(__name__)

AG_FEATURE_NAME = "ag_path_exists"


def path_exists_column(ag: AttackGraph, src_ips, dst_ips) -> np.ndarray:
    """Binary vector: 1 where the AG has an attack path src -> dst."""
    src = np.asarray(src_ips, dtype=object)
    dst = np.asarray(dst_ips, dtype=object)
    if len(src) != len(dst):
        raise LengthMismatch(len(src), len(dst))
    cache: dict[tuple[str, str], float] = {}
    out = np.zeros(len(src), dtype=np.float64)
    for i, pair in enumerate(zip(src, dst)):
        hit = cache.get(pair)
        if hit is None:
            hit = cache[pair] = 1.0 if ag.has_attack_path(*pair) else 0.0
        out[i] = hit
    return out


@dataclass(frozen=True, eq=False)
class AugmentedDataset:
    base: Dataset
    ag_feature: np.ndarray

    def __post_init__(self):
        if len(self.ag_feature) != len(self.base):
            raise LengthMismatch(len(self.base), len(self.ag_feature))

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.base.feature_names + (AG_FEATURE_NAME,)

    @property
    def width(self) -> int:
        return self.base.n_features + 1

    def matrix(self, selection: FeatureSelection | None = None) -> np.ndarray:
        """Selected base columns followed by the AG column (never selected away)."""
        base = self.base.features if selection is None else selection.apply(self.base.features)
        return np.column_stack([base, self.ag_feature])


def inject_ag_feature(dataset: Dataset, ag: AttackGraph) -> AugmentedDataset:
    return AugmentedDataset(dataset, path_exists_column(ag, dataset.src_ip, dataset.dst_ip))


@dataclass(frozen=True, eq=False)
class Detector:
    """A trained tree plus the feature pipeline it expects.

    When ``ag`` is set the model was trained on the augmented matrix and the
    same graph supplies the injected column at prediction time.
    """

    model: DecisionTreeModel
    selection: FeatureSelection | None = None
    ag: AttackGraph | None = None

    @property
    def uses_ag(self) -> bool:
        return self.ag is not None

    def matrix(self, dataset: Dataset) -> np.ndarray:
        if self.ag is not None:
            return inject_ag_feature(dataset, self.ag).matrix(self.selection)
        return dataset.features if self.selection is None else self.selection.apply(dataset.features)

    def predict(self, dataset: Dataset) -> np.ndarray:
        x = self.matrix(dataset)
        if x.shape[1] != self.model.n_features:
            raise WidthMismatch(self.model.n_features, x.shape[1])
        return self.model.predict(x)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "selection": None if self.selection is None else self.selection.to_dict(),
            "ag": None if self.ag is None else self.ag.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Detector:
        return cls(
            DecisionTreeModel.from_dict(doc["model"]),
            None if doc.get("selection") is None else FeatureSelection.from_dict(doc["selection"]),
            None if doc.get("ag") is None else AttackGraph.from_dict(doc["ag"]),
        )


def train_baseline(
    train: Dataset, selection: FeatureSelection | None = None, hp: TreeHyperparams | None = None, seed: int = 0
) -> Detector:
    x = train.features if selection is None else selection.apply(train.features)
    return Detector(train_tree(x, train.labels, hp, seed), selection, None)


def train_ids_ag(
    train: Dataset,
    ag: AttackGraph,
    selection: FeatureSelection | None = None,
    hp: TreeHyperparams | None = None,
    seed: int = 0,
) -> Detector:
    """Train on the selected base features plus the path-existence column."""
    x = inject_ag_feature(train, ag).matrix(selection)
    model = train_tree(x, train.labels, hp, seed)
    log.debug("trained AG-integrated tree: depth %d, %d leaves", model.depth, model.n_leaves)
    return Detector(model, selection, ag)


@dataclass(frozen=True, eq=False)
class RefinementReport:
    flipped_indices: tuple[int, ...]
    original: np.ndarray
    refined: np.ndarray

    @property
    def flipped_count(self) -> int:
        return len(self.flipped_indices)

    def to_dict(self) -> dict:
        return {
            "flipped_count": self.flipped_count,
            "flipped_indices": list(self.flipped_indices),
            "original": [ClassLabel(int(c)).display for c in self.original],
            "refined": [ClassLabel(int(c)).display for c in self.refined],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def refine_predictions(pred, flows: Dataset, ag: AttackGraph) -> tuple[np.ndarray, RefinementReport]:
    """Flip attack predictions with no supporting attack path to Benign.

    Benign predictions are never touched, whatever the graph says.
    """
    original = np.asarray(pred, dtype=np.int64)
    if len(original) != len(flows):
        raise LengthMismatch(len(original), len(flows))
    supported = path_exists_column(ag, flows.src_ip, flows.dst_ip) > 0
    flip = (original != ClassLabel.BENIGN) & ~supported
    refined = original.copy()
    refined[flip] = ClassLabel.BENIGN
    report = RefinementReport(tuple(int(i) for i in np.flatnonzero(flip)), original.copy(), refined.copy())
    return refined, report


def gain(
    baseline: Detector, refined: Detector | None, test: Dataset, ag: AttackGraph | None = None
) -> tuple[Metrics, Metrics, MetricsDelta]:
    """Evaluate both pipelines on the same test split.

    ``refined=None`` means the refinement pipeline: the baseline's predictions
    passed through :func:`refine_predictions` with ``ag``.
    """
    base_pred = baseline.predict(test)
    if refined is None:
        if ag is None:
            raise ValueError("refinement needs an attack graph")
        new_pred, _ = refine_predictions(base_pred, test, ag)
    else:
        new_pred = refined.predict(test)
    m_base = evaluate(base_pred, test.labels)
    m_new = evaluate(new_pred, test.labels)
    return m_base, m_new, delta(m_base, m_new)
