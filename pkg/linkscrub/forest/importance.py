from typing import List, Optional, Tuple

import numpy as np

from linkscrub.core.models import FrozenModel
from linkscrub.features.extraction import FeatureVector
from linkscrub.forest.dataset import Dataset
from linkscrub.forest.forest import Forest
from linkscrub.labels.models import Label


class FeatureImportance(FrozenModel):
    feature: str
    percent: float

    def render(self) -> str:
        return f"{self.feature}\t{self.percent:.2f}%"


def decompose_rows(forest: Forest, X: np.ndarray) -> Tuple[float, np.ndarray]:
    """Prior and per-feature contributions averaged over the trees, prior + row sum is the score"""
    X = np.asarray(X, dtype=np.float64).reshape(-1, len(forest.feature_names))
    prior, contributions = 0.0, np.zeros(X.shape, dtype=np.float64)

    for tree in forest.trees:
        tree_prior, tree_contributions = tree.contributions(X)
        prior += tree_prior
        contributions += tree_contributions

    return prior / len(forest.trees), contributions / len(forest.trees)


def decompose(forest: Forest, x: FeatureVector | np.ndarray) -> Tuple[float, np.ndarray]:
    if isinstance(x, FeatureVector):
        forest.check_version(x.version)
        x = x.as_array(forest.feature_names)

    prior, contributions = decompose_rows(forest, x)
    return prior, contributions[0]


def feature_importance(forest: Forest, dataset: Dataset, label: Optional[Label] = None) -> List[FeatureImportance]:
    """
    Percentage of instances where a feature has the largest absolute contribution,
    most important first. label=ATS only counts instances the forest predicts ATS.
    """
    X = dataset.X[:, forest.columns_of(dataset.feature_names)]

    if label is not None:
        predicted = np.array([forest.label_for(score) for score in forest.scores(X)], dtype=object)
        X = X[predicted == label] if len(X) else X

    counts = np.zeros(len(forest.feature_names), dtype=np.int64)
    if len(X):
        _, contributions = decompose_rows(forest, X)
        top = np.argmax(np.abs(contributions), axis=1)
        counts = np.bincount(top, minlength=len(forest.feature_names))

    percents = 100.0 * counts / len(X) if len(X) else np.zeros(len(counts))
    order = sorted(range(len(counts)), key=lambda index: (-counts[index], index))
    return [FeatureImportance(feature=forest.feature_names[index], percent=float(percents[index])) for index in order]


__all__ = [
    "FeatureImportance",
    "decompose",
    "decompose_rows",
    "feature_importance",
]
