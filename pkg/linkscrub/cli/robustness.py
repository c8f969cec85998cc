import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Set, Tuple

import numpy as np

from linkscrub.cli.evasion import evade_combine, evade_rename, evade_split
from linkscrub.core.models import BaseModel
from linkscrub.features.extraction import COMBINE_INVARIANT_FEATURES, FEATURE_NAMES, FeatureRow, extract_all
from linkscrub.features.matrix import from_rows
from linkscrub.forest.config import ForestConfig
from linkscrub.forest.dataset import Dataset
from linkscrub.forest.evaluation import cross_validate
from linkscrub.forest.forest import Forest, predict_many, train
from linkscrub.graph.flows import DEFAULT_MIN_LEN
from linkscrub.graph.pipeline import page_graphs
from linkscrub.labels.models import Label
from linkscrub.traces.models import Trace
from linkscrub.urls.models import DecorationId, DecorationKind

logger = logging.getLogger(__name__)


class RenameOutcome(BaseModel):
    compared: int = 0
    vectors_invariant: bool = True
    predictions_unchanged: bool = True
    moved_path_rows: int = 0
    path_changed_features: List[str] = []


class SplitOutcome(BaseModel):
    baseline_accuracy: float = 0.0
    evaded_accuracy: float = 0.0

    @property
    def drop(self) -> float:
        """Accuracy drop in percentage points"""
        return 100.0 * (self.baseline_accuracy - self.evaded_accuracy)


class CombineOutcome(BaseModel):
    planted_requests: int = 0
    detected: int = 0

    @property
    def detection_rate(self) -> float:
        return self.detected / self.planted_requests if self.planted_requests else 0.0


class RobustnessReport(BaseModel):
    rename: RenameOutcome = RenameOutcome()
    split: SplitOutcome = SplitOutcome()
    combine: CombineOutcome = CombineOutcome()

    def render(self) -> str:
        changed = ",".join(self.rename.path_changed_features) or "-"
        return (
            f"rename: {self.rename.compared} query/fragment rows, vectors invariant={self.rename.vectors_invariant}, "
            f"predictions unchanged={self.rename.predictions_unchanged}, "
            f"{self.rename.moved_path_rows} path rows differ in {changed}\n"
            f"split: accuracy {self.split.baseline_accuracy:.4f} -> {self.split.evaded_accuracy:.4f} "
            f"(drop {self.split.drop:.2f} points)\n"
            f"combine: {self.combine.detected}/{self.combine.planted_requests} planted requests detected "
            f"({self.combine.detection_rate:.2%})\n"
        )


def feature_rows(traces: Iterable[Trace], min_len: int = DEFAULT_MIN_LEN, partial: bool = False) -> List[FeatureRow]:
    return [row for graph in page_graphs(traces, min_len=min_len, partial=partial) for row in extract_all(graph)]


def _request_of(node_id: str) -> str:
    return node_id[len("decoration|") :].rsplit("|", 2)[0]


def _path_index(rows: List[FeatureRow]) -> Dict[Tuple[str, str, str, int], FeatureRow]:
    """Path rows keyed by (trace, request, value, occurrence), values survive a reordering"""
    seen: Dict[Tuple[str, str, str], int] = defaultdict(int)
    index = {}

    for row in rows:
        if row.decoration.kind != DecorationKind.PATH:
            continue

        base = (row.trace_id, _request_of(row.node_id), row.decoration.value)
        index[(*base, seen[base])] = row
        seen[base] += 1

    return index


def rename_outcome(
    traces: List[Trace],
    forest: Forest,
    min_len: int = DEFAULT_MIN_LEN,
    seed: int = 0,
) -> RenameOutcome:
    before = feature_rows(traces, min_len=min_len)
    after = feature_rows(evade_rename(traces, seed=seed).traces, min_len=min_len)
    outcome = RenameOutcome()

    after_by_node = {(row.trace_id, row.node_id): row for row in after}
    pairs = []
    for row in before:
        if row.decoration.kind == DecorationKind.PATH:
            continue

        renamed = after_by_node.get((row.trace_id, row.node_id))
        if renamed is None or renamed.vector != row.vector:
            outcome.vectors_invariant = False
        if renamed is not None:
            pairs.append((row, renamed))

    outcome.compared = len(pairs)
    if pairs:
        columns = [FEATURE_NAMES.index(name) for name in forest.feature_names]
        X_before = np.array([row.vector.as_array()[columns] for row, _ in pairs])
        X_after = np.array([row.vector.as_array()[columns] for _, row in pairs])
        labels_before = [forest.label_for(score) for score in forest.scores(X_before)]
        labels_after = [forest.label_for(score) for score in forest.scores(X_after)]
        outcome.predictions_unchanged = labels_before == labels_after

    changed: Set[str] = set()
    after_paths = _path_index(after)
    for key, row in _path_index(before).items():
        moved = after_paths.get(key)
        if moved is None:
            continue

        differing = {name for name in FEATURE_NAMES if row.vector[name] != moved.vector[name]}
        if differing:
            outcome.moved_path_rows += 1
            changed |= differing

    outcome.path_changed_features = sorted(changed)
    return outcome


def split_outcome(
    traces: List[Trace],
    labels: Dict[DecorationId, Label],
    cfg: ForestConfig,
    baseline_accuracy: float,
    k: int = 10,
    seed: int = 0,
) -> SplitOutcome:
    """Split values only keep their flows with min_len 0 and partial matching"""
    evaded = evade_split(traces, seed=seed)
    matrix = from_rows(feature_rows(evaded.traces, min_len=0, partial=True))
    dataset = Dataset.from_matrix(matrix, evaded.carry_labels(labels))
    report = cross_validate(dataset, k=k, cfg=cfg)
    return SplitOutcome(baseline_accuracy=baseline_accuracy, evaded_accuracy=report.metrics.accuracy)


def combine_outcome(
    traces: List[Trace],
    dataset: Dataset,
    planted: Set[DecorationId],
    cfg: ForestConfig,
    min_len: int = DEFAULT_MIN_LEN,
    seed: int = 0,
) -> CombineOutcome:
    """Combined decorations are scored by a forest trained on the features combining leaves unchanged"""
    forest = train(dataset.select(COMBINE_INVARIANT_FEATURES), cfg)
    evaded = evade_combine(traces, seed=seed)
    matrix = from_rows(feature_rows(evaded.traces, min_len=min_len))
    carried = evaded.carry_ids(planted)

    outcome = CombineOutcome()
    scores = predict_many(forest, matrix)
    for row, score in zip(matrix.rows, scores):
        if row.id in carried:
            outcome.planted_requests += 1
            outcome.detected += int(forest.label_for(score) == Label.ATS)

    return outcome


def robustness(
    traces: List[Trace],
    labels: Dict[DecorationId, Label],
    planted: Set[DecorationId],
    cfg: ForestConfig = ForestConfig(),
    k: int = 10,
    min_len: int = DEFAULT_MIN_LEN,
    seed: int = 0,
) -> RobustnessReport:
    matrix = from_rows(feature_rows(traces, min_len=min_len))
    dataset = Dataset.from_matrix(matrix, labels)
    forest = train(dataset, cfg)
    baseline = cross_validate(dataset, k=k, cfg=cfg)

    report = RobustnessReport(
        rename=rename_outcome(traces, forest, min_len=min_len, seed=seed),
        split=split_outcome(traces, labels, cfg, baseline.metrics.accuracy, k=k, seed=seed),
        combine=combine_outcome(traces, dataset, planted, cfg, min_len=min_len, seed=seed),
    )
    logger.info("Robustness:\n%s", report.render())
    return report


__all__ = [
    "RenameOutcome",
    "SplitOutcome",
    "CombineOutcome",
    "RobustnessReport",
    "feature_rows",
    "rename_outcome",
    "split_outcome",
    "combine_outcome",
    "robustness",
]
