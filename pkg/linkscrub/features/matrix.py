import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
from pydantic import validator

from linkscrub.core.constants import FEATURE_VERSION
from linkscrub.core.exceptions import FeatureVersionError, ParsingError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.features.extraction import FEATURE_NAMES, FeatureRow, extract_all
from linkscrub.features.keywords import KeywordLists
from linkscrub.graph.models import PageGraph
from linkscrub.urls.models import DecorationId, DecorationKind

logger = logging.getLogger(__name__)

ROW_COLUMNS = ["site", "fqdn", "key", "kind", "position"]

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


def matrix_header(version: str = FEATURE_VERSION) -> str:
    return f"trace_id@v{version}"


class MatrixRow(FrozenModel):
    trace_id: str
    id: DecorationId
    kind: DecorationKind
    position: int


class FeatureMatrix(BaseModel):
    """One row per decoration node, columns in FEATURE_NAMES order"""

    rows: List[MatrixRow] = []
    feature_names: List[str] = list(FEATURE_NAMES)
    version: str = FEATURE_VERSION
    X: np.ndarray = np.zeros((0, len(FEATURE_NAMES)))

    @validator("X")
    def two_dimensional(cls, X: np.ndarray, values) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        names = values.get("feature_names", FEATURE_NAMES)

        if X.ndim != 2 or X.shape[1] != len(names):
            raise ValueError(f"matrix must have shape (n, {len(names)}), got {X.shape}")

        return X

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    def select(self, names: List[str]) -> "FeatureMatrix":
        indexes = [self.feature_names.index(name) for name in names]
        return FeatureMatrix(rows=self.rows, feature_names=list(names), X=self.X[:, indexes], version=self.version)

    def dumps(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([matrix_header(self.version), *ROW_COLUMNS, *self.feature_names])

        for row, values in zip(self.rows, self.X):
            writer.writerow(
                [
                    row.trace_id,
                    row.id.site,
                    row.id.fqdn,
                    row.id.key,
                    row.kind.value,
                    row.position,
                    *(repr(float(value)) for value in values),
                ]
            )

        return buffer.getvalue()

    @file_errors.decorate
    def write(self, path: Path | str):
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="")


def from_rows(rows: Iterable[FeatureRow]) -> FeatureMatrix:
    rows = sorted(rows, key=lambda row: row.trace_id)
    return FeatureMatrix(
        rows=[
            MatrixRow(
                trace_id=row.trace_id,
                id=row.decoration.id,
                kind=row.decoration.kind,
                position=row.decoration.position,
            )
            for row in rows
        ],
        X=np.array([row.vector.as_array() for row in rows]).reshape(len(rows), len(FEATURE_NAMES)),
    )


def build_feature_matrix(graphs: Iterable[PageGraph], keywords: Optional[KeywordLists] = None) -> FeatureMatrix:
    """Feature rows of every decoration, sorted by trace id and node order"""
    rows = [row for graph in graphs for row in extract_all(graph, keywords)]
    matrix = from_rows(rows)
    logger.info("Built feature matrix with %d rows", len(matrix))
    return matrix


def parse_feature_matrix(text: str) -> FeatureMatrix:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)

    if header is None:
        raise ParsingError("feature matrix is empty")
    elif not header[0].startswith("trace_id@v"):
        raise ParsingError(f"feature matrix header must start with trace_id@v, got {header[0]!r}")

    version = header[0].partition("@v")[2]
    names = header[len(ROW_COLUMNS) + 1 :]
    if version != FEATURE_VERSION or header[1 : len(ROW_COLUMNS) + 1] != ROW_COLUMNS:
        raise FeatureVersionError(f"feature matrix version {version!r} is not {FEATURE_VERSION!r}")

    rows, values = [], []
    for line_number, record in enumerate(reader, start=2):
        if len(record) != len(header):
            raise ParsingError(f"line {line_number}: expected {len(header)} cells, got {len(record)}")

        trace_id, site, fqdn, key, kind, position = record[: len(ROW_COLUMNS) + 1]
        try:
            rows.append(
                MatrixRow(
                    trace_id=trace_id,
                    id=DecorationId(site=site, fqdn=fqdn, key=key),
                    kind=DecorationKind(kind),
                    position=int(position),
                )
            )
            values.append([float(cell) for cell in record[len(ROW_COLUMNS) + 1 :]])
        except ValueError as exc:
            raise ParsingError(f"line {line_number}: {exc}") from exc

    return FeatureMatrix(
        rows=rows,
        feature_names=names,
        version=version,
        X=np.array(values, dtype=np.float64).reshape(len(rows), len(names)),
    )


@file_errors.decorate
def read_feature_matrix(path: Path | str) -> FeatureMatrix:
    return parse_feature_matrix(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "MatrixRow",
    "FeatureMatrix",
    "build_feature_matrix",
    "from_rows",
    "parse_feature_matrix",
    "read_feature_matrix",
    "matrix_header",
]
