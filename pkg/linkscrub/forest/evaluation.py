import logging
from typing import Dict, List, Optional

import numpy as np

from linkscrub.core.exceptions import DatasetError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.forest.config import ForestConfig
from linkscrub.forest.dataset import ATS, NON_ATS, Dataset
from linkscrub.forest.forest import train
from linkscrub.labels.models import Label
from linkscrub.urls.models import DecorationId, DecorationKind

logger = logging.getLogger(__name__)

MAX_DISAGREEMENTS = 50


class Metrics(FrozenModel):
    """ATS is the positive class. Precision is 0 when nothing is predicted ATS."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    accuracy: float = 0.0
    precision: float = 0.0
    recall: float = 0.0

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "Metrics":
        total = tp + fp + tn + fn
        return cls(
            tp=tp,
            fp=fp,
            tn=tn,
            fn=fn,
            accuracy=(tp + tn) / total if total else 0.0,
            precision=tp / (tp + fp) if tp + fp else 0.0,
            recall=tp / (tp + fn) if tp + fn else 0.0,
        )

    @classmethod
    def from_labels(cls, expected: np.ndarray, predicted: np.ndarray) -> "Metrics":
        return cls.from_counts(
            tp=int(np.sum((expected == ATS) & (predicted == ATS))),
            fp=int(np.sum((expected == NON_ATS) & (predicted == ATS))),
            tn=int(np.sum((expected == NON_ATS) & (predicted == NON_ATS))),
            fn=int(np.sum((expected == ATS) & (predicted == NON_ATS))),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def render(self) -> str:
        return (
            f"accuracy={self.accuracy:.4f} precision={self.precision:.4f} recall={self.recall:.4f} "
            f"tp={self.tp} fp={self.fp} tn={self.tn} fn={self.fn}"
        )


class Disagreement(FrozenModel):
    trace_id: str
    id: DecorationId
    kind: DecorationKind
    expected: Label
    predicted: Label
    score: float


class EvalReport(BaseModel):
    k: int
    seed: int
    metrics: Metrics
    folds: List[Metrics] = []
    per_kind: Dict[DecorationKind, Metrics] = {}
    disagreements: List[Disagreement] = []

    def render(self) -> str:
        lines = [f"{self.k}-fold cross validation, seed {self.seed}", f"overall: {self.metrics.render()}"]

        for index, fold in enumerate(self.folds):
            lines.append(f"fold {index}: {fold.render()}")

        for kind in DecorationKind:
            if kind in self.per_kind:
                lines.append(f"{kind.value}: {self.per_kind[kind].render()}")

        if self.disagreements:
            lines.append(f"disagreements (first {len(self.disagreements)}):")
            lines.extend(
                f"  {item.trace_id} {item.id.site} {item.id} expected={item.expected.value} "
                f"predicted={item.predicted.value} score={item.score:.4f}"
                for item in self.disagreements
            )

        return "\n".join(lines) + "\n"


def stratified_folds(y: np.ndarray, k: int, seed: int = 0) -> List[np.ndarray]:
    """
    Test indexes of k folds. Each class is shuffled and dealt round-robin, the dealing
    position carries over between classes so fold sizes differ by at most one.
    """
    if k < 2:
        raise DatasetError(f"cross validation needs k >= 2, got {k}")

    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    offset = 0

    for cls in (ATS, NON_ATS):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise DatasetError(f"class {cls} has {len(members)} instances, fewer than k={k}")

        members = rng.permutation(members)
        assignment[members] = (offset + np.arange(len(members))) % k
        offset += len(members)

    return [np.flatnonzero(assignment == fold) for fold in range(k)]


def cross_validate(
    dataset: Dataset,
    k: int = 10,
    cfg: ForestConfig = ForestConfig(),
    seed: Optional[int] = None,
) -> EvalReport:
    """Balancing and training see the training split of each fold only. Metrics are micro-averaged."""
    seed = cfg.seed if seed is None else seed
    folds = stratified_folds(dataset.y, k, seed)
    predicted = np.empty(len(dataset), dtype=np.int8)
    scores = np.empty(len(dataset), dtype=np.float64)
    fold_metrics = []

    for index, test in enumerate(folds):
        train_mask = np.ones(len(dataset), dtype=bool)
        train_mask[test] = False

        forest = train(dataset.subset(np.flatnonzero(train_mask)), cfg)
        scores[test] = forest.scores(dataset.X[test])
        predicted[test] = np.where(scores[test] >= forest.threshold, ATS, NON_ATS)
        fold_metrics.append(Metrics.from_labels(dataset.y[test], predicted[test]))
        logger.debug("Fold %d: %s", index, fold_metrics[-1].render())

    per_kind = {}
    if dataset.rows:
        kinds = np.array([row.kind.value for row in dataset.rows])
        for kind in DecorationKind:
            mask = kinds == kind.value
            if mask.any():
                per_kind[kind] = Metrics.from_labels(dataset.y[mask], predicted[mask])

    disagreements = []
    for index in np.flatnonzero(predicted != dataset.y)[:MAX_DISAGREEMENTS]:
        if not dataset.rows:
            break

        row = dataset.rows[index]
        disagreements.append(
            Disagreement(
                trace_id=row.trace_id,
                id=row.id,
                kind=row.kind,
                expected=Label.ATS if dataset.y[index] == ATS else Label.NON_ATS,
                predicted=Label.ATS if predicted[index] == ATS else Label.NON_ATS,
                score=float(scores[index]),
            )
        )

    metrics = Metrics.from_labels(dataset.y, predicted)
    logger.info("Cross validation: %s", metrics.render())
    return EvalReport(
        k=k,
        seed=seed,
        metrics=metrics,
        folds=fold_metrics,
        per_kind=per_kind,
        disagreements=disagreements,
    )


__all__ = [
    "Metrics",
    "Disagreement",
    "EvalReport",
    "stratified_folds",
    "cross_validate",
    "MAX_DISAGREEMENTS",
]
