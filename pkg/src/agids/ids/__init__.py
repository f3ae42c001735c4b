"""Feature selection, CART training and detection metrics."""

from agids.ids.anova import Direction, FeatureSelection, anova_f, select_features
from agids.ids.metrics import ClassScores, Metrics, MetricsDelta, confusion_matrix, delta, evaluate
from agids.ids.tree import DecisionTreeModel, Leaf, Split, TreeHyperparams, best_split, predict, train_tree

__all__ = [
    "ClassScores",
    "DecisionTreeModel",
    "Direction",
    "FeatureSelection",
    "Leaf",
    "Metrics",
    "MetricsDelta",
    "Split",
    "TreeHyperparams",
    "anova_f",
    "best_split",
    "confusion_matrix",
    "delta",
    "evaluate",
    "predict",
    "select_features",
    "train_tree",
]
