import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, List

import numpy as np
from pydantic import confloat

from linkscrub.core.constants import FEATURE_VERSION
from linkscrub.core.exceptions import DatasetError, FeatureVersionError, ParsingError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.features.extraction import FeatureVector
from linkscrub.features.matrix import FeatureMatrix
from linkscrub.forest.config import ClassBalance, ForestConfig
from linkscrub.forest.dataset import Dataset, balance
from linkscrub.forest.tree import Tree, grow_tree
from linkscrub.labels.models import Label
from linkscrub.urls.models import DecorationId, DecorationKind

logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = ["trace_id", "site", "fqdn", "key", "kind", "position", "label", "score"]

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


class Prediction(FrozenModel):
    label: Label
    score: confloat(ge=0.0, le=1.0)


class ScoredDecoration(FrozenModel):
    """Prediction for one decoration instance of a feature matrix"""

    trace_id: str
    id: DecorationId
    kind: DecorationKind
    position: int
    label: Label
    score: confloat(ge=0.0, le=1.0)


class Forest(BaseModel):
    trees: List[Tree]
    feature_names: List[str]
    feature_version: str = FEATURE_VERSION
    config: ForestConfig = ForestConfig()

    @property
    def threshold(self) -> float:
        return self.config.threshold

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Mean ATS leaf fraction over the trees"""
        X = np.asarray(X, dtype=np.float64).reshape(-1, len(self.feature_names))
        return np.mean([tree.predict_proba(X) for tree in self.trees], axis=0)

    def label_for(self, score: float) -> Label:
        return Label.ATS if score >= self.threshold else Label.NON_ATS

    def check_version(self, version: str):
        if version != self.feature_version:
            raise FeatureVersionError(
                f"forest was trained on feature version {self.feature_version}, data has version {version}"
            )

    def columns_of(self, feature_names: List[str]) -> List[int]:
        missing = [name for name in self.feature_names if name not in feature_names]
        if missing:
            raise FeatureVersionError(f"data lacks features the forest was trained on: {missing}")

        return [feature_names.index(name) for name in self.feature_names]


def train(dataset: Dataset, cfg: ForestConfig = ForestConfig()) -> Forest:
    if cfg.class_balance == ClassBalance.DOWNSAMPLE:
        dataset = balance(dataset, cfg.seed)

    if not len(dataset):
        raise DatasetError("cannot train on an empty dataset")

    rngs = [np.random.default_rng(child) for child in np.random.SeedSequence(cfg.seed).spawn(cfg.tree_count)]
    logger.info(
        "Training %d trees on %d rows (%d ATS, %d NonATS)",
        cfg.tree_count,
        len(dataset),
        dataset.ats_count,
        dataset.non_ats_count,
    )

    def grow(rng: np.random.Generator) -> Tree:
        return grow_tree(dataset.X, dataset.y, cfg, rng)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as executor:
            trees = list(executor.map(grow, rngs))
    else:
        trees = [grow(rng) for rng in rngs]

    return Forest(trees=trees, feature_names=list(dataset.feature_names), config=cfg)


def predict(forest: Forest, x: FeatureVector) -> Prediction:
    forest.check_version(x.version)
    score = float(forest.scores(x.as_array(forest.feature_names))[0])
    return Prediction(label=forest.label_for(score), score=score)


def predict_many(forest: Forest, matrix: FeatureMatrix) -> np.ndarray:
    forest.check_version(matrix.version)

    if not len(matrix):
        return np.zeros(0, dtype=np.float64)

    return forest.scores(matrix.X[:, forest.columns_of(matrix.feature_names)])


def predict_matrix(forest: Forest, matrix: FeatureMatrix) -> List[ScoredDecoration]:
    scores = predict_many(forest, matrix)
    return [
        ScoredDecoration(
            trace_id=row.trace_id,
            id=row.id,
            kind=row.kind,
            position=row.position,
            label=forest.label_for(score),
            score=float(score),
        )
        for row, score in zip(matrix.rows, scores)
    ]


def dumps_predictions(predictions: Iterable[ScoredDecoration]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PREDICTION_COLUMNS)

    for item in predictions:
        writer.writerow(
            [
                item.trace_id,
                item.id.site,
                item.id.fqdn,
                item.id.key,
                item.kind.value,
                item.position,
                item.label.value,
                repr(float(item.score)),
            ]
        )

    return buffer.getvalue()


def parse_predictions(text: str) -> List[ScoredDecoration]:
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != PREDICTION_COLUMNS:
        raise ParsingError(f"predictions header must be {','.join(PREDICTION_COLUMNS)}")

    predictions = []
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        elif len(row) != len(PREDICTION_COLUMNS):
            raise ParsingError(f"predictions line {line_number}: expected {len(PREDICTION_COLUMNS)} cells")

        trace_id, site, fqdn, key, kind, position, label, score = row
        try:
            predictions.append(
                ScoredDecoration(
                    trace_id=trace_id,
                    id=DecorationId(site=site, fqdn=fqdn, key=key),
                    kind=DecorationKind(kind),
                    position=int(position),
                    label=Label(label),
                    score=float(score),
                )
            )
        except ValueError as exc:
            raise ParsingError(f"predictions line {line_number}: {exc}") from exc

    return predictions


@file_errors.decorate
def write_predictions(predictions: Iterable[ScoredDecoration], path: Path | str):
    Path(path).write_text(dumps_predictions(predictions), encoding="utf-8")


@file_errors.decorate
def read_predictions(path: Path | str) -> List[ScoredDecoration]:
    return parse_predictions(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "Forest",
    "Prediction",
    "ScoredDecoration",
    "train",
    "predict",
    "predict_many",
    "predict_matrix",
    "dumps_predictions",
    "parse_predictions",
    "write_predictions",
    "read_predictions",
    "PREDICTION_COLUMNS",
]
