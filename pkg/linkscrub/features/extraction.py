import logging
import math
from typing import Dict, Iterator, List, Optional, Set

import numpy as np
from pydantic import validator

from linkscrub.core.constants import FEATURE_VERSION
from linkscrub.core.exceptions import NotFoundError
from linkscrub.core.models import FrozenModel
from linkscrub.features.entropy import shannon_entropy
from linkscrub.features.keywords import KeywordLists, default_keywords
from linkscrub.features.metrics import GraphMetrics, graph_metrics
from linkscrub.graph.models import (
    INFILTRATING,
    Edge,
    EdgeKind,
    InteractionKind,
    Node,
    NodeKind,
    PageGraph,
    response_node_id,
)
from linkscrub.graph.views import flow_view, interaction_view
from linkscrub.traces.models import StoreKind
from linkscrub.urls.models import LinkDecoration

logger = logging.getLogger(__name__)

METRIC_NAMES = list(GraphMetrics.__fields__)

STRUCTURE_FEATURES = [
    *METRIC_NAMES,
    "ancestor_ad_keyword",
    "ancestor_fp_keyword",
    "ancestor_script_length",
    "descendant_of_script",
    "parent_is_eval",
    "num_script_predecessors",
]
CONTENT_FEATURES = [
    "shannon_entropy",
    "max_decoration_depth",
]
FLOW_FEATURES = [
    "parent_ls_sets",
    "parent_ls_gets",
    "parent_cookie_sets",
    "parent_cookie_gets",
    "parent_requests_sent",
    "parent_requests_received",
    "parent_redirects_sent",
    "parent_redirects_received",
    "parent_redirect_depth",
    "common_storage_access",
    "cookie_exfiltrations",
    "parent_cookie_infiltrations",
    "setter_exfiltrations",
    "setter_redirects",
    *(f"flow_{name}" for name in METRIC_NAMES),
]
FEATURE_NAMES = [*STRUCTURE_FEATURES, *CONTENT_FEATURES, *FLOW_FEATURES]

# features every decoration of one request shares
COMBINE_INVARIANT_FEATURES = [
    "ancestor_ad_keyword",
    "ancestor_fp_keyword",
    "ancestor_script_length",
    "descendant_of_script",
    "parent_is_eval",
    "num_script_predecessors",
    "parent_ls_sets",
    "parent_ls_gets",
    "parent_cookie_sets",
    "parent_cookie_gets",
    "parent_requests_sent",
    "parent_requests_received",
    "parent_redirects_sent",
    "parent_redirects_received",
    "parent_redirect_depth",
    "common_storage_access",
    "parent_cookie_infiltrations",
    "setter_exfiltrations",
    "setter_redirects",
]

CHAIN_EDGES = frozenset({InteractionKind.INITIATES, InteractionKind.CREATES, InteractionKind.REDIRECTS})


class FeatureVector(FrozenModel):
    values: Dict[str, float]
    version: str = FEATURE_VERSION

    @validator("values")
    def complete_and_finite(cls, values: Dict[str, float]) -> Dict[str, float]:
        missing = [name for name in FEATURE_NAMES if name not in values]
        if missing:
            raise ValueError(f"missing features {missing}")

        for name, value in values.items():
            if not math.isfinite(value):
                raise ValueError(f"feature {name} is not finite: {value}")

        return {name: float(values[name]) for name in FEATURE_NAMES}

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def as_array(self, names: Optional[List[str]] = None) -> np.ndarray:
        return np.array([self.values[name] for name in names or FEATURE_NAMES], dtype=np.float64)


class FeatureRow(FrozenModel):
    trace_id: str
    node_id: str
    decoration: LinkDecoration
    vector: FeatureVector


class FeatureExtractor:
    """Computes feature vectors of the decoration nodes of one graph, sharing its views and chains"""

    def __init__(self, graph: PageGraph, keywords: Optional[KeywordLists] = None):
        self.graph = graph
        self.keywords = keywords or default_keywords()
        self.interaction = interaction_view(graph)
        self.flow = flow_view(graph)
        self._chains: Dict[str, List[Node]] = {}
        self._in_edges, self._out_edges = graph.adjacency()

    def in_edges(self, node_id: str) -> List[Edge]:
        return self._in_edges.get(node_id, [])

    def out_edges(self, node_id: str) -> List[Edge]:
        return self._out_edges.get(node_id, [])

    def chain(self, request_id: str) -> List[Node]:
        """Initiation chain above a request, nearest ancestor first"""
        if request_id in self._chains:
            return self._chains[request_id]

        chain, seen, current = [], {request_id}, request_id
        while True:
            parent = next((edge.src for edge in self.in_edges(current) if edge.subkind in CHAIN_EDGES), None)
            if parent is None or parent in seen:
                break

            seen.add(parent)
            chain.append(self.graph.node(parent))
            current = parent

        self._chains[request_id] = chain
        return chain

    def initiating_script(self, request_id: str) -> Optional[Node]:
        return next((node for node in self.chain(request_id) if node.kind == NodeKind.SCRIPT), None)

    def redirect_depth(self, request_id: str) -> int:
        depth, current = 0, request_id
        for node in self.chain(request_id):
            if not any(
                edge.subkind == InteractionKind.REDIRECTS and edge.src == node.id for edge in self.in_edges(current)
            ):
                break

            depth += 1
            current = node.id

        return depth

    def storage_accesses(self, script: Optional[Node]) -> Set[str]:
        if script is None:
            return set()

        return {
            edge.dst
            for edge in self.out_edges(script.id)
            if edge.subkind in (InteractionKind.SET, InteractionKind.GET)
        }

    def storage_counts(self, script: Optional[Node]) -> Dict[str, float]:
        counts = {"parent_ls_sets": 0, "parent_ls_gets": 0, "parent_cookie_sets": 0, "parent_cookie_gets": 0}
        if script is None:
            return counts

        for edge in self.out_edges(script.id):
            if edge.subkind not in (InteractionKind.SET, InteractionKind.GET):
                continue

            store = "ls" if self.graph.node(edge.dst).attrs["store"] == StoreKind.LOCAL_STORAGE.value else "cookie"
            counts[f"parent_{store}_{edge.subkind.value}s"] += edge.count

        return counts

    def requests_of(self, script: Optional[Node]) -> List[str]:
        if script is None:
            return []

        initiators = [script.id]
        initiators.extend(
            edge.dst for edge in self.out_edges(script.id) if edge.subkind == InteractionKind.CREATES
        )
        return [
            edge.dst
            for initiator in initiators
            for edge in self.out_edges(initiator)
            if edge.subkind == InteractionKind.INITIATES and self.graph.node(edge.dst).is_request
        ]

    def common_storage_access(self, request_id: str, script: Optional[Node]) -> int:
        accessed = self.storage_accesses(script)
        if not accessed:
            return 0

        return sum(
            1
            for other in self.graph.request_nodes()
            if other.id != request_id and accessed & self.storage_accesses(self.initiating_script(other.id))
        )

    def flow_metrics(self, node_id: str) -> GraphMetrics:
        return graph_metrics(self.flow, node_id) if node_id in self.flow else GraphMetrics()

    def extract(self, node_id: str) -> FeatureVector:
        node = self.graph.node(node_id)
        if node.kind != NodeKind.DECORATION:
            raise NotFoundError(f"{node_id!r} is not a decoration node")

        request = self.graph.parent_request(node_id)
        chain = self.chain(request.id)
        scripts = [ancestor for ancestor in chain if ancestor.kind == NodeKind.SCRIPT]
        script = scripts[0] if scripts else None
        script_urls = [ancestor.attrs.get("url", "") for ancestor in scripts]

        redirects_sent = sum(1 for edge in self.out_edges(request.id) if edge.subkind == InteractionKind.REDIRECTS)
        redirects_received = sum(
            1 for edge in self.in_edges(request.id) if edge.subkind == InteractionKind.REDIRECTS
        )

        response = response_node_id(request.attrs["request_id"])
        infiltrated = [edge.dst for edge in self.out_edges(response) if edge.kind == EdgeKind.INFILTRATION]
        sent = self.requests_of(script)

        values: Dict[str, float] = graph_metrics(self.interaction, node_id).dict()
        values.update(
            ancestor_ad_keyword=float(any(self.keywords.is_ad(url) for url in script_urls)),
            ancestor_fp_keyword=float(any(self.keywords.is_fingerprint(url) for url in script_urls)),
            ancestor_script_length=sum(ancestor.attrs.get("length", 0) for ancestor in scripts),
            descendant_of_script=float(script is not None),
            parent_is_eval=float(script is not None and bool(script.attrs.get("is_eval"))),
            num_script_predecessors=len(scripts),
            shannon_entropy=shannon_entropy(node.decoration.value),
            max_decoration_depth=node.attrs["depth"],
            parent_requests_sent=len(sent),
            parent_requests_received=sum(
                1
                for request_id in sent
                for edge in self.out_edges(request_id)
                if edge.subkind == InteractionKind.RESPONDS
            ),
            parent_redirects_sent=redirects_sent,
            parent_redirects_received=redirects_received,
            parent_redirect_depth=self.redirect_depth(request.id),
            common_storage_access=self.common_storage_access(request.id, script),
            cookie_exfiltrations=sum(1 for edge in self.in_edges(node_id) if edge.kind == EdgeKind.EXFILTRATION),
            parent_cookie_infiltrations=len(infiltrated),
            setter_exfiltrations=sum(
                1
                for storage in infiltrated
                for edge in self.out_edges(storage)
                if edge.kind == EdgeKind.EXFILTRATION
            ),
            setter_redirects=(
                redirects_sent + redirects_received if INFILTRATING in self.graph.marks_of(request.id) else 0
            ),
            **self.storage_counts(script),
        )
        values.update({f"flow_{name}": value for name, value in self.flow_metrics(node_id).dict().items()})
        return FeatureVector(values=values)

    def rows(self) -> Iterator[FeatureRow]:
        for node in self.graph.decoration_nodes():
            yield FeatureRow(
                trace_id=self.graph.trace_id,
                node_id=node.id,
                decoration=node.decoration,
                vector=self.extract(node.id),
            )


def extract_features(graph: PageGraph, node_id: str, keywords: Optional[KeywordLists] = None) -> FeatureVector:
    return FeatureExtractor(graph, keywords).extract(node_id)


def extract_all(graph: PageGraph, keywords: Optional[KeywordLists] = None) -> List[FeatureRow]:
    rows = list(FeatureExtractor(graph, keywords).rows())
    logger.debug("Extracted %d feature vectors from graph %s", len(rows), graph.trace_id)
    return rows


__all__ = [
    "FEATURE_NAMES",
    "STRUCTURE_FEATURES",
    "CONTENT_FEATURES",
    "FLOW_FEATURES",
    "COMBINE_INVARIANT_FEATURES",
    "FeatureVector",
    "FeatureRow",
    "FeatureExtractor",
    "extract_features",
    "extract_all",
]
