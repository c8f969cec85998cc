import logging
from typing import Dict, List, Optional, Tuple

from linkscrub.core.exceptions import UrlParsingError
from linkscrub.graph.models import (
    Direction,
    Edge,
    EdgeKind,
    InteractionKind,
    Node,
    NodeKind,
    PageGraph,
    StorageObservation,
    decoration_node_id,
    html_node_id,
    request_node_id,
    response_node_id,
    script_node_id,
    storage_node_id,
)
from linkscrub.traces.models import DOCUMENT, EventKind, Trace, TraceEvent
from linkscrub.urls.models import DecoratedUrl, DecorationKind
from linkscrub.urls.parsing import decompose, name_decorations

logger = logging.getLogger(__name__)


class GraphBuilder:
    """Accumulates nodes and de-duplicated edges while replaying the events of a trace"""

    def __init__(self, trace: Trace):
        self.trace = trace
        self.nodes: Dict[str, Node] = {}
        self.edges: Dict[Tuple[str, str, str, str], Edge] = {}
        self.storage_history: Dict[str, List[StorageObservation]] = {}

    def add_node(self, node_id: str, kind: NodeKind, **attrs) -> str:
        existing = self.nodes.get(node_id)
        attrs = {key: value for key, value in attrs.items() if value is not None}

        if existing is None:
            self.nodes[node_id] = Node(id=node_id, kind=kind, attrs=attrs)
        elif attrs:
            # a script referenced before its load event gets its attributes once the load is seen
            self.nodes[node_id] = existing.copy(update={"attrs": {**existing.attrs, **attrs}})

        return node_id

    def add_edge(self, src: str, dst: str, subkind: InteractionKind):
        edge = Edge(src=src, dst=dst, kind=EdgeKind.INTERACTION, subkind=subkind)
        existing = self.edges.get(edge.key)

        if existing is None:
            self.edges[edge.key] = edge
        else:
            self.edges[edge.key] = existing.copy(update={"count": existing.count + 1})

    def script(self, actor: str) -> Optional[str]:
        if actor == DOCUMENT:
            return None

        node_id = script_node_id(actor)
        if node_id not in self.nodes:
            self.add_node(node_id, NodeKind.SCRIPT, url="", length=0, is_eval=False)

        return node_id

    def observe(self, node_id: str, event: TraceEvent, value: str, source: str):
        self.storage_history.setdefault(node_id, []).append(
            StorageObservation(seq=event.seq, value=value, source=source, actor=event.actor)
        )

    def on_script(self, event: TraceEvent):
        is_eval = event.kind == EventKind.EVAL_SCRIPT
        node_id = script_node_id(event.actor)
        self.add_node(
            node_id,
            NodeKind.SCRIPT,
            url=None if is_eval else event.payload.url,
            length=event.payload.length,
            is_eval=is_eval,
            seq=event.seq,
        )

        parent = self.script(event.payload.parent)
        if parent is not None:
            self.add_edge(parent, node_id, InteractionKind.INITIATES)

    def on_storage(self, event: TraceEvent):
        payload = event.payload
        node_id = self.add_node(
            storage_node_id(payload.store.value, payload.key),
            NodeKind.STORAGE,
            store=payload.store.value,
            key=payload.key,
        )
        is_set = event.kind == EventKind.STORAGE_SET
        self.observe(node_id, event, payload.value, "set" if is_set else "get")

        script = self.script(event.actor)
        if script is not None:
            self.add_edge(script, node_id, InteractionKind.SET if is_set else InteractionKind.GET)

    def on_request(self, event: TraceEvent):
        node_id = self.add_node(
            request_node_id(event.payload.request_id),
            NodeKind.NETWORK,
            url=event.payload.url,
            direction=Direction.REQUEST,
            seq=event.seq,
            request_id=event.payload.request_id,
        )

        if event.kind == EventKind.ELEMENT_REQUEST:
            initiator = self.add_node(html_node_id(event.actor), NodeKind.HTML)
        else:
            initiator = self.script(event.actor)

        if initiator is not None:
            self.add_edge(initiator, node_id, InteractionKind.INITIATES)

    def on_response(self, event: TraceEvent):
        payload = event.payload
        node_id = self.add_node(
            response_node_id(payload.request_id),
            NodeKind.NETWORK,
            direction=Direction.RESPONSE,
            seq=event.seq,
            request_id=payload.request_id,
            status=payload.status,
            body=payload.body,
            set_storage=[(write.store.value, write.key, write.value) for write in payload.set_storage],
        )
        self.add_edge(request_node_id(payload.request_id), node_id, InteractionKind.RESPONDS)

        for write in payload.set_storage:
            storage = self.add_node(
                storage_node_id(write.store.value, write.key),
                NodeKind.STORAGE,
                store=write.store.value,
                key=write.key,
            )
            self.observe(storage, event, write.value, "header")

    def on_redirect(self, event: TraceEvent):
        payload = event.payload
        node_id = self.add_node(
            request_node_id(payload.request_id),
            NodeKind.NETWORK,
            url=payload.to_url,
            direction=Direction.REQUEST,
            seq=event.seq,
            request_id=payload.request_id,
            redirected_from=payload.from_request_id,
        )
        self.add_edge(request_node_id(payload.from_request_id), node_id, InteractionKind.REDIRECTS)

    def on_element(self, event: TraceEvent):
        node_id = self.add_node(html_node_id(event.payload.element_id), NodeKind.HTML, tag=event.payload.tag)

        script = self.script(event.actor)
        if script is not None:
            self.add_edge(script, node_id, InteractionKind.CREATES)

    def build(self) -> PageGraph:
        handlers = {
            EventKind.SCRIPT_LOAD: self.on_script,
            EventKind.EVAL_SCRIPT: self.on_script,
            EventKind.STORAGE_SET: self.on_storage,
            EventKind.STORAGE_GET: self.on_storage,
            EventKind.REQUEST: self.on_request,
            EventKind.ELEMENT_REQUEST: self.on_request,
            EventKind.RESPONSE: self.on_response,
            EventKind.REDIRECT: self.on_redirect,
            EventKind.ELEMENT_CREATE: self.on_element,
        }

        for event in self.trace.events:
            handlers[event.kind](event)

        return PageGraph(
            trace_id=self.trace.trace_id,
            site=self.trace.site,
            page_url=self.trace.page_url,
            nodes=self.nodes,
            edges=list(self.edges.values()),
            storage_history=self.storage_history,
        )


def build_graph(trace: Trace) -> PageGraph:
    graph = GraphBuilder(trace).build()
    logger.debug("Built graph %s: %d nodes, %d edges", graph.trace_id, len(graph.nodes), len(graph.edges))
    return graph


def raw_values(decorated: DecoratedUrl) -> List[str]:
    """Encoded text of each decoration, in name_decorations() order"""
    values = [segment.raw for segment in decorated.path_segments]
    values.extend(param.raw_value for param in decorated.query_params if not param.is_empty)

    if decorated.fragment_params is not None:
        values.extend(param.raw_value for param in decorated.fragment_params)
    elif decorated.fragment is not None and decorated.fragment.raw:
        values.append(decorated.fragment.raw)

    return values


def decoration_depth(kind: DecorationKind, position: int, url_depth: int) -> int:
    if kind == DecorationKind.PATH:
        return position + 1
    elif kind == DecorationKind.QUERY:
        return url_depth + 1

    return url_depth + 2


def attach_decoration_nodes(graph: PageGraph) -> PageGraph:
    if graph.decorations_attached:
        return graph

    nodes = dict(graph.nodes)
    edges = list(graph.edges)
    warnings = list(graph.warnings)

    for request in graph.request_nodes():
        request_id = request.attrs["request_id"]

        try:
            decorated = decompose(request.attrs["url"], graph.site)
        except UrlParsingError as exc:
            message = f"request {request_id}: unparseable URL: {exc}"
            logger.warning(message)
            warnings.append(message)
            continue

        for decoration, raw_value in zip(name_decorations(decorated, graph.site), raw_values(decorated)):
            node_id = decoration_node_id(request_id, decoration.kind.value, decoration.position)
            nodes[node_id] = Node(
                id=node_id,
                kind=NodeKind.DECORATION,
                attrs={
                    "decoration": decoration,
                    "raw_value": raw_value,
                    "request_id": request_id,
                    "seq": request.seq,
                    "url_depth": decorated.depth,
                    "depth": decoration_depth(decoration.kind, decoration.position, decorated.depth),
                },
            )
            edges.append(
                Edge(src=request.id, dst=node_id, kind=EdgeKind.INTERACTION, subkind=InteractionKind.DECORATES)
            )

    return graph.replace(nodes=nodes, edges=edges, warnings=warnings, decorations_attached=True)


__all__ = [
    "GraphBuilder",
    "build_graph",
    "attach_decoration_nodes",
    "decoration_depth",
    "raw_values",
]
