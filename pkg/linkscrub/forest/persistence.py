import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from linkscrub.core.constants import FOREST_FORMAT_VERSION
from linkscrub.core.exceptions import ModelFormatError
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.forest.config import ForestConfig
from linkscrub.forest.forest import Forest
from linkscrub.forest.tree import LEAF, Tree

logger = logging.getLogger(__name__)

TREE_ARRAYS = ("feature", "threshold", "left", "right", "value")

forest_errors = ErrorWrapper(
    error_mappings={
        json.JSONDecodeError: lambda exc: ModelFormatError(f"forest file is not JSON: {exc}"),
        ValidationError: lambda exc: ModelFormatError(f"forest file has invalid fields: {exc}"),
        KeyError: lambda exc: ModelFormatError(f"forest file lacks {exc}"),
        TypeError: lambda exc: ModelFormatError(f"forest file has a malformed value: {exc}"),
        ValueError: lambda exc: ModelFormatError(f"forest file has a malformed value: {exc}"),
        OSError: ModelFormatError,
    },
)


def _tree_dict(tree: Tree) -> dict:
    return {name: getattr(tree, name).tolist() for name in TREE_ARRAYS}


def dumps_forest(forest: Forest) -> str:
    return json.dumps(
        {
            "format": FOREST_FORMAT_VERSION,
            "feature_version": forest.feature_version,
            "feature_names": forest.feature_names,
            "config": json.loads(forest.config.json()),
            "trees": [_tree_dict(tree) for tree in forest.trees],
        },
        sort_keys=True,
    )


def _load_tree(data: dict, feature_count: int) -> Tree:
    tree = Tree(
        feature=np.asarray(data["feature"], dtype=np.int64),
        threshold=np.asarray(data["threshold"], dtype=np.float64),
        left=np.asarray(data["left"], dtype=np.int64),
        right=np.asarray(data["right"], dtype=np.int64),
        value=np.asarray(data["value"], dtype=np.float64).reshape(-1, 2),
    )

    n = tree.node_count
    if n == 0 or any(len(getattr(tree, name)) != n for name in TREE_ARRAYS):
        raise ModelFormatError("tree arrays must be non-empty and of equal length")

    internal = tree.left != LEAF
    if np.any((tree.right != LEAF) != internal):
        raise ModelFormatError("a node has exactly one child")
    elif np.any((tree.feature[internal] < 0) | (tree.feature[internal] >= feature_count)):
        raise ModelFormatError("split references an unknown feature")
    elif np.any((tree.left[internal] <= 0) | (tree.left[internal] >= n)):
        raise ModelFormatError("child index out of range")
    elif np.any((tree.right[internal] <= 0) | (tree.right[internal] >= n)):
        raise ModelFormatError("child index out of range")
    elif np.any(tree.value < 0) or np.any(tree.value.sum(axis=1) <= 0):
        raise ModelFormatError("every node needs non-empty class counts")
    elif not np.all(np.isfinite(tree.threshold)):
        raise ModelFormatError("thresholds must be finite")

    return tree


@forest_errors.decorate
def loads_forest(text: str) -> Forest:
    data = json.loads(text)

    if not isinstance(data, dict):
        raise ModelFormatError("forest file must hold a JSON object")
    elif data.get("format") != FOREST_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported forest format {data.get('format')!r}")

    feature_names = [str(name) for name in data["feature_names"]]
    trees = [_load_tree(tree, len(feature_names)) for tree in data["trees"]]
    if not trees:
        raise ModelFormatError("forest has no trees")

    return Forest(
        trees=trees,
        feature_names=feature_names,
        feature_version=str(data["feature_version"]),
        config=ForestConfig(**data["config"]),
    )


@forest_errors.decorate
def save_forest(forest: Forest, path: Path | str):
    Path(path).write_text(dumps_forest(forest), encoding="utf-8")
    logger.info("Saved %d trees to %s", len(forest.trees), path)


@forest_errors.decorate
def load_forest(path: Path | str) -> Forest:
    return loads_forest(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "dumps_forest",
    "loads_forest",
    "save_forest",
    "load_forest",
]
