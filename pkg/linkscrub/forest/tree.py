from typing import List, Optional, Tuple

import numpy as np

from linkscrub.core.models import BaseModel
from linkscrub.forest.config import ForestConfig

LEAF = -1


class Tree(BaseModel):
    """
    Binary decision tree stored as parallel arrays indexed by node, root first.
    `value` holds the [NonATS, ATS] sample counts of every node, internal nodes included.
    A sample goes left iff x[feature] <= threshold.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def ats_fraction(self) -> np.ndarray:
        return self.value[:, 1] / self.value.sum(axis=1)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] == LEAF

    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if not self.is_leaf(node):
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1

        return int(depths.max()) if self.node_count else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row"""
        nodes = np.zeros(len(X), dtype=np.int64)
        active = self.left[nodes] != LEAF

        while active.any():
            rows = np.flatnonzero(active)
            current = nodes[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            nodes[rows] = np.where(go_left, self.left[current], self.right[current])
            active = self.left[nodes] != LEAF

        return nodes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.ats_fraction[self.apply(X)]

    def contributions(self, X: np.ndarray) -> Tuple[float, np.ndarray]:
        """
        Splits each prediction along its root-to-leaf path: every split adds the change
        in ATS fraction to its feature. prior + row sum equals predict_proba().
        """
        fraction = self.ats_fraction
        result = np.zeros(X.shape, dtype=np.float64)
        nodes = np.zeros(len(X), dtype=np.int64)
        active = self.left[nodes] != LEAF

        while active.any():
            rows = np.flatnonzero(active)
            current = nodes[rows]
            features = self.feature[current]
            go_left = X[rows, features] <= self.threshold[current]
            children = np.where(go_left, self.left[current], self.right[current])
            np.add.at(result, (rows, features), fraction[children] - fraction[current])
            nodes[rows] = children
            active = self.left[nodes] != LEAF

        return float(fraction[0]), result


def gini(positives: np.ndarray, totals: np.ndarray) -> np.ndarray:
    share = positives / totals
    return 2.0 * share * (1.0 - share)


def best_split(x: np.ndarray, y: np.ndarray) -> Optional[Tuple[float, float]]:
    """Lowest weighted Gini split of one feature as (impurity, threshold), None for a constant feature"""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    distinct = xs[:-1] < xs[1:]

    if not distinct.any():
        return None

    n = len(xs)
    left_n = np.arange(1, n, dtype=np.float64)
    right_n = n - left_n
    left_pos = np.cumsum(ys)[:-1].astype(np.float64)
    right_pos = ys.sum() - left_pos

    impurity = (left_n * gini(left_pos, left_n) + right_n * gini(right_pos, right_n)) / n
    impurity = np.where(distinct, impurity, np.inf)
    position = int(np.argmin(impurity))

    low, high = xs[position], xs[position + 1]
    threshold = low / 2.0 + high / 2.0
    if not low <= threshold < high:
        threshold = low

    return float(impurity[position]), float(threshold)


class TreeGrower:
    def __init__(self, X: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng: np.random.Generator):
        self.X = X
        self.y = y
        self.cfg = cfg
        self.rng = rng
        self.features_per_split = cfg.features_for(X.shape[1])

        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[Tuple[float, float]] = []

    def choose_split(self, indexes: np.ndarray) -> Optional[Tuple[int, float]]:
        """
        Features are visited in random order. The search goes on past features_per_split
        until some visited feature can split the node. Ties keep the first candidate.
        """
        best: Optional[Tuple[float, int, float]] = None
        y = self.y[indexes]

        for visited, feature in enumerate(self.rng.permutation(self.X.shape[1]), start=1):
            split = best_split(self.X[indexes, feature], y)

            if split is not None and (best is None or split[0] < best[0]):
                best = (split[0], int(feature), split[1])

            if visited >= self.features_per_split and best is not None:
                break

        return None if best is None else (best[1], best[2])

    def add_node(self, indexes: np.ndarray) -> int:
        positives = float(self.y[indexes].sum())
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append((len(indexes) - positives, positives))
        return len(self.feature) - 1

    def grow(self, indexes: np.ndarray) -> Tree:
        root = self.add_node(indexes)
        stack = [(root, indexes, 0)]

        while stack:
            node, node_indexes, depth = stack.pop()
            positives = self.value[node][1]

            if (
                len(node_indexes) < self.cfg.min_split_size
                or positives in (0, len(node_indexes))
                or (self.cfg.max_depth is not None and depth >= self.cfg.max_depth)
            ):
                continue

            split = self.choose_split(node_indexes)
            if split is None:
                continue

            feature, threshold = split
            goes_left = self.X[node_indexes, feature] <= threshold
            left = self.add_node(node_indexes[goes_left])
            right = self.add_node(node_indexes[~goes_left])

            self.feature[node], self.threshold[node] = feature, threshold
            self.left[node], self.right[node] = left, right
            stack.extend([(right, node_indexes[~goes_left], depth + 1), (left, node_indexes[goes_left], depth + 1)])

        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64).reshape(-1, 2),
        )


def grow_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng: np.random.Generator) -> Tree:
    n = len(y)
    indexes = rng.integers(0, n, n) if cfg.bootstrap else np.arange(n)
    return TreeGrower(X, y, cfg, rng).grow(indexes)


__all__ = [
    "LEAF",
    "Tree",
    "TreeGrower",
    "grow_tree",
    "best_split",
    "gini",
]
