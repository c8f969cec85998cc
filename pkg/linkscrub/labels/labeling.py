import csv
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from linkscrub.core.exceptions import ParsingError
from linkscrub.core.models import BaseModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.graph.models import EdgeKind, InteractionKind, PageGraph
from linkscrub.labels.models import Label, LabeledDecoration, Provenance
from linkscrub.labels.repository import LabelRepository
from linkscrub.labels.rules import RequestFilter
from linkscrub.labels.sources import CookiePurposeDb, CuratedList
from linkscrub.urls.models import DecorationId

logger = logging.getLogger(__name__)

LABEL_COLUMNS = ["site", "fqdn", "key", "label", "provenance"]

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


def _graph_labels(
    graph: PageGraph,
    request_rules: RequestFilter,
    cookie_purposes: CookiePurposeDb,
    curated: CuratedList,
) -> Iterable[LabeledDecoration]:
    for request in graph.request_nodes():
        flagged = request_rules.matches(request.attrs["url"])

        for edge in graph.edges_from(request.id):
            if edge.subkind != InteractionKind.DECORATES:
                continue

            decoration = graph.node(edge.dst).decoration
            provenance = set()

            if not flagged:
                provenance.add(Provenance.REQUEST_FILTER)
            if curated.matches(decoration.id):
                provenance.add(Provenance.CURATED_LIST)

            for flow in graph.edges_into(edge.dst):
                if flow.kind != EdgeKind.EXFILTRATION:
                    continue

                key = graph.node(flow.src).attrs["key"]
                if cookie_purposes.is_tracking(graph.site, key):
                    provenance.add(Provenance.COOKIE_PURPOSE)
                    break

            yield LabeledDecoration(id=decoration.id, provenance=frozenset(provenance))


def label_decorations(
    graphs: Iterable[PageGraph],
    request_rules: RequestFilter,
    cookie_purposes: CookiePurposeDb,
    curated: CuratedList,
    repository: Optional[LabelRepository] = None,
) -> List[LabeledDecoration]:
    """
    Labels every DecorationId seen in the graphs, merging observations across traces.
    The result is sorted by id and does not depend on graph order.
    """
    repository = repository if repository is not None else LabelRepository()

    for graph in graphs:
        for labeled in _graph_labels(graph, request_rules, cookie_purposes, curated):
            repository.save(labeled)

    results = []
    for labeled in repository:
        if labeled.is_conflict and not labeled.conflicts:
            message = f"{labeled.id.site} {labeled.id} is ATS by {labeled.provenance_text()} in an unflagged request"
            logger.info(message)
            labeled = repository.save(LabeledDecoration(id=labeled.id, conflicts=[message]))

        results.append(labeled)

    return results


class LabelingSummary(BaseModel):
    total: int = 0
    ats: int = 0
    non_ats: int = 0
    unknown: int = 0
    conflicts: int = 0

    @property
    def labeled(self) -> int:
        return self.ats + self.non_ats

    @property
    def labeled_fraction(self) -> float:
        return self.labeled / self.total if self.total else 0.0

    @property
    def ats_share(self) -> float:
        return self.ats / self.labeled if self.labeled else 0.0

    @property
    def non_ats_share(self) -> float:
        return self.non_ats / self.labeled if self.labeled else 0.0

    def render(self) -> str:
        return (
            f"decorations: {self.total}\n"
            f"labeled: {self.labeled} ({self.labeled_fraction:.2%})\n"
            f"ATS: {self.ats} ({self.ats_share:.2%} of labeled)\n"
            f"NonATS: {self.non_ats} ({self.non_ats_share:.2%} of labeled)\n"
            f"unknown: {self.unknown}\n"
            f"conflicts: {self.conflicts}\n"
        )


def labeling_summary(labeled: Iterable[LabeledDecoration]) -> LabelingSummary:
    summary = LabelingSummary()

    for item in labeled:
        summary.total += 1
        summary.conflicts += int(item.is_conflict)

        if item.label == Label.ATS:
            summary.ats += 1
        elif item.label == Label.NON_ATS:
            summary.non_ats += 1
        else:
            summary.unknown += 1

    return summary


def label_map(labeled: Iterable[LabeledDecoration]) -> Dict[DecorationId, Label]:
    return {item.id: item.label for item in labeled}


def labels_from_map(labels: Dict[DecorationId, Label]) -> List[LabeledDecoration]:
    """Labeled decorations for a plain label mapping, each with the least provenance implying its label"""
    implied = {
        Label.ATS: {Provenance.COOKIE_PURPOSE},
        Label.NON_ATS: {Provenance.REQUEST_FILTER},
        Label.UNKNOWN: set(),
    }
    return [
        LabeledDecoration(id=decoration_id, provenance=frozenset(implied[label]))
        for decoration_id, label in sorted(labels.items(), key=lambda item: item[0].sort_key)
    ]


def dumps_labels(labeled: Iterable[LabeledDecoration]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LABEL_COLUMNS)

    for item in sorted(labeled, key=lambda item: item.id.sort_key):
        writer.writerow([item.id.site, item.id.fqdn, item.id.key, item.label.value, item.provenance_text()])

    return buffer.getvalue()


def parse_labels(text: str) -> List[LabeledDecoration]:
    """
    Reads a labels file back. Provenance is what the label derives from,
    so a row whose label disagrees with its provenance is rejected.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)

    if header != LABEL_COLUMNS:
        raise ParsingError(f"labels header must be {','.join(LABEL_COLUMNS)}")

    labeled = []
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        elif len(row) != len(LABEL_COLUMNS):
            raise ParsingError(f"labels line {line_number}: expected {len(LABEL_COLUMNS)} cells")

        site, fqdn, key, label, provenance = row
        try:
            item = LabeledDecoration(
                id=DecorationId(site=site, fqdn=fqdn, key=key),
                provenance=frozenset(Provenance(source) for source in provenance.split(";") if source),
            )
            expected = Label(label)
        except ValueError as exc:
            raise ParsingError(f"labels line {line_number}: {exc}") from exc

        if item.label != expected:
            raise ParsingError(f"labels line {line_number}: label {label} does not follow from {provenance!r}")

        labeled.append(item)

    return labeled


@file_errors.decorate
def write_labels(labeled: Iterable[LabeledDecoration], path: Path | str):
    Path(path).write_text(dumps_labels(labeled), encoding="utf-8")


@file_errors.decorate
def read_labels(path: Path | str) -> List[LabeledDecoration]:
    return parse_labels(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "label_decorations",
    "LabelingSummary",
    "labeling_summary",
    "label_map",
    "labels_from_map",
    "dumps_labels",
    "parse_labels",
    "write_labels",
    "read_labels",
    "LABEL_COLUMNS",
]
