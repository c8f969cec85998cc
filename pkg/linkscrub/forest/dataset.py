import logging
from typing import Dict, List, Sequence

import numpy as np
from pydantic import validator

from linkscrub.core.exceptions import DatasetError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.features.matrix import FeatureMatrix
from linkscrub.labels.models import Label
from linkscrub.urls.models import DecorationId, DecorationKind

logger = logging.getLogger(__name__)

ATS, NON_ATS = 1, 0


class DatasetRow(FrozenModel):
    trace_id: str
    id: DecorationId
    kind: DecorationKind


def check_finite(X: np.ndarray, feature_names: Sequence[str]):
    bad = np.argwhere(~np.isfinite(X))
    if len(bad):
        row, column = bad[0]
        raise DatasetError("non-finite feature value", row=int(row), column=feature_names[column])


class Dataset(BaseModel):
    """Labeled feature rows, y is 1 for ATS and 0 for NonATS"""

    feature_names: List[str]
    rows: List[DatasetRow] = []
    X: np.ndarray
    y: np.ndarray

    @validator("X")
    def finite_matrix(cls, X: np.ndarray, values) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        names = values.get("feature_names", [])

        if X.ndim != 2 or X.shape[1] != len(names):
            raise ValueError(f"X must have shape (n, {len(names)}), got {X.shape}")

        check_finite(X, names)
        return X

    @validator("y")
    def binary_labels(cls, y: np.ndarray, values) -> np.ndarray:
        y = np.asarray(y, dtype=np.int8)
        X = values.get("X")

        if X is not None and y.shape != (X.shape[0],):
            raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        elif not np.isin(y, (ATS, NON_ATS)).all():
            raise ValueError("y must hold 0 (NonATS) or 1 (ATS)")

        return y

    def __len__(self):
        return len(self.y)

    @property
    def ats_count(self) -> int:
        return int(np.sum(self.y == ATS))

    @property
    def non_ats_count(self) -> int:
        return int(np.sum(self.y == NON_ATS))

    def subset(self, indexes: np.ndarray | Sequence[int]) -> "Dataset":
        indexes = np.asarray(indexes, dtype=np.int64)
        return Dataset(
            feature_names=self.feature_names,
            rows=[self.rows[index] for index in indexes] if self.rows else [],
            X=self.X[indexes],
            y=self.y[indexes],
        )

    def select(self, names: Sequence[str]) -> "Dataset":
        columns = [self.feature_names.index(name) for name in names]
        return Dataset(feature_names=list(names), rows=self.rows, X=self.X[:, columns], y=self.y)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(feature_names=self.feature_names, rows=self.rows, X=self.X, y=y)

    def shuffled_labels(self, seed: int) -> "Dataset":
        """Label-permuted copy, the null control for cross validation"""
        return self.with_labels(np.random.default_rng(seed).permutation(self.y))

    @classmethod
    def from_matrix(cls, matrix: FeatureMatrix, labels: Dict[DecorationId, Label]) -> "Dataset":
        """Rows with an ATS or NonATS label. Unknown and unlabeled rows are dropped."""
        check_finite(matrix.X, matrix.feature_names)

        keep, y = [], []
        for index, row in enumerate(matrix.rows):
            label = labels.get(row.id, Label.UNKNOWN)
            if label != Label.UNKNOWN:
                keep.append(index)
                y.append(ATS if label == Label.ATS else NON_ATS)

        logger.info("Dataset keeps %d of %d rows", len(keep), len(matrix))
        return cls(
            feature_names=matrix.feature_names,
            rows=[
                DatasetRow(trace_id=matrix.rows[index].trace_id, id=matrix.rows[index].id, kind=matrix.rows[index].kind)
                for index in keep
            ],
            X=matrix.X[keep].reshape(len(keep), len(matrix.feature_names)),
            y=np.array(y, dtype=np.int8),
        )


def balance(dataset: Dataset, seed: int = 0) -> Dataset:
    """
    Downsamples the majority class without replacement to the minority size.
    Kept rows stay in their original order.
    """
    ats = np.flatnonzero(dataset.y == ATS)
    non_ats = np.flatnonzero(dataset.y == NON_ATS)

    if not len(ats) or not len(non_ats):
        raise DatasetError(f"cannot balance a single class dataset ({len(ats)} ATS, {len(non_ats)} NonATS)")

    minority, majority = (ats, non_ats) if len(ats) <= len(non_ats) else (non_ats, ats)
    sampled = np.random.default_rng(seed).choice(majority, size=len(minority), replace=False)
    return dataset.subset(np.sort(np.concatenate([minority, sampled])))


__all__ = [
    "ATS",
    "NON_ATS",
    "Dataset",
    "DatasetRow",
    "check_finite",
    "balance",
]
