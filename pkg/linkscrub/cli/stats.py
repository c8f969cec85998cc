from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Tuple

from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.graph.models import InteractionKind, PageGraph
from linkscrub.labels.models import Label
from linkscrub.labels.rules import RequestFilter
from linkscrub.urls.models import DecorationId, DecorationKind

DEFAULT_TOP_N = 10


class KindRow(BaseModel):
    kind: DecorationKind
    counts: Dict[Label, int] = {label: 0 for label in Label}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percent(self, label: Label) -> float:
        return 100.0 * self.counts[label] / self.total if self.total else 0.0


class Coverage(FrozenModel):
    fqdn: str
    key: str
    sites: int


class PrevalenceReport(BaseModel):
    sites: int = 0
    requests: int = 0
    decorations: int = 0
    kinds: List[KindRow] = [KindRow(kind=kind) for kind in DecorationKind]
    per_site_decorations: float = 0.0
    per_site_ids: float = 0.0
    per_request: Dict[Label, float] = {Label.ATS: 0.0, Label.NON_ATS: 0.0}
    endpoints: Dict[Label, int] = {Label.ATS: 0, Label.NON_ATS: 0}
    top: List[Coverage] = []

    def row(self, kind: DecorationKind) -> KindRow:
        return next(row for row in self.kinds if row.kind == kind)

    def render(self) -> str:
        lines = [
            f"sites: {self.sites} requests: {self.requests} decorations: {self.decorations}",
            "kind\t" + "\t".join(label.value for label in Label) + "\ttotal",
        ]

        for row in self.kinds:
            cells = [f"{row.counts[label]} ({row.percent(label):.2f}%)" for label in Label]
            lines.append("\t".join([row.kind.value, *cells, str(row.total)]))

        lines.append(f"per site: {self.per_site_decorations:.2f} decorations, {self.per_site_ids:.2f} distinct ids")
        for label, average in self.per_request.items():
            lines.append(f"{label.value} endpoints: {self.endpoints[label]}, {average:.2f} decorations per request")

        if self.top:
            lines.append("top decorations by site coverage:")
            lines.extend(f"  {item.fqdn}|{item.key}\t{item.sites}" for item in self.top)

        return "\n".join(lines) + "\n"


def _is_ats_endpoint(
    url: str,
    decoration_ids: List[DecorationId],
    labels: Dict[DecorationId, Label],
    request_rules: Optional[RequestFilter],
) -> bool:
    if request_rules is not None and len(request_rules):
        return request_rules.matches(url)

    return any(labels.get(decoration_id) == Label.ATS for decoration_id in decoration_ids)


def prevalence(
    graphs: Iterable[PageGraph],
    labels: Dict[DecorationId, Label],
    request_rules: Optional[RequestFilter] = None,
    top_n: int = DEFAULT_TOP_N,
) -> PrevalenceReport:
    """
    Decoration counts by kind and label, averaged per site and per request.
    A request is an ATS endpoint when the request rules flag it, or without rules when one of
    its decorations is labeled ATS.
    """
    report = PrevalenceReport()
    site_decorations: Dict[str, int] = defaultdict(int)
    site_ids: Dict[str, set] = defaultdict(set)
    coverage: Dict[Tuple[str, str], set] = defaultdict(set)
    endpoint_decorations: Dict[Label, int] = {Label.ATS: 0, Label.NON_ATS: 0}

    for graph in graphs:
        site_decorations.setdefault(graph.site, 0)

        for request in graph.request_nodes():
            decoration_ids = [
                graph.node(edge.dst).decoration.id
                for edge in graph.edges_from(request.id)
                if edge.subkind == InteractionKind.DECORATES
            ]
            report.requests += 1

            for decoration_id in decoration_ids:
                label = labels.get(decoration_id, Label.UNKNOWN)
                report.row(decoration_id.kind).counts[label] += 1
                report.decorations += 1
                site_decorations[graph.site] += 1
                site_ids[graph.site].add(decoration_id)
                coverage[(decoration_id.fqdn, decoration_id.key)].add(decoration_id.site)

            endpoint = (
                Label.ATS
                if _is_ats_endpoint(request.attrs.get("url", ""), decoration_ids, labels, request_rules)
                else Label.NON_ATS
            )
            report.endpoints[endpoint] += 1
            endpoint_decorations[endpoint] += len(decoration_ids)

    report.sites = len(site_decorations)
    if report.sites:
        report.per_site_decorations = report.decorations / report.sites
        report.per_site_ids = sum(len(ids) for ids in site_ids.values()) / report.sites

    for label, count in report.endpoints.items():
        report.per_request[label] = endpoint_decorations[label] / count if count else 0.0

    ranked = sorted(coverage.items(), key=lambda item: (-len(item[1]), item[0]))
    report.top = [Coverage(fqdn=fqdn, key=key, sites=len(sites)) for (fqdn, key), sites in ranked[:top_n]]
    return report


__all__ = [
    "KindRow",
    "Coverage",
    "PrevalenceReport",
    "prevalence",
    "DEFAULT_TOP_N",
]
