from collections import defaultdict
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Tuple

from pydantic import PrivateAttr

from linkscrub.core.exceptions import NotFoundError
from linkscrub.core.models import FrozenModel
from linkscrub.urls.models import LinkDecoration


class NodeKind(str, Enum):
    STORAGE = "storage"
    HTML = "html"
    SCRIPT = "script"
    NETWORK = "network"
    DECORATION = "decoration"


class EdgeKind(str, Enum):
    INTERACTION = "interaction"
    EXFILTRATION = "exfiltration"
    INFILTRATION = "infiltration"


class InteractionKind(str, Enum):
    SET = "set"
    GET = "get"
    INITIATES = "initiates"
    CREATES = "creates"
    RESPONDS = "responds"
    REDIRECTS = "redirects"
    DECORATES = "decorates"


class Encoding(str, Enum):
    PLAIN = "plain"
    BASE64 = "base64"
    MD5 = "md5"
    SHA1 = "sha1"
    SHA256 = "sha256"


class MatchForm(str, Enum):
    DECODED = "decoded"
    RAW = "raw"
    HEADER = "header"
    BODY = "body"


class Direction(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"


INFILTRATING = "infiltrating"
INFILTRATING_PARENT = "infiltrating-parent"

FLOW_KINDS = frozenset({EdgeKind.EXFILTRATION, EdgeKind.INFILTRATION})


def storage_node_id(store: str, key: str) -> str:
    return f"storage|{store}|{key}"


def script_node_id(actor: str) -> str:
    return f"script|{actor}"


def html_node_id(element_id: str) -> str:
    return f"html|{element_id}"


def request_node_id(request_id: str) -> str:
    return f"request|{request_id}"


def response_node_id(request_id: str) -> str:
    return f"response|{request_id}"


def decoration_node_id(request_id: str, kind: str, position: int) -> str:
    return f"decoration|{request_id}|{kind}|{position}"


class Evidence(FrozenModel):
    """How a flow edge was matched: `span` locates the encoded value inside the matched text"""

    encoding: Encoding
    form: MatchForm
    span: Tuple[int, int]
    value: str
    partial: bool = False

    def render(self) -> str:
        text = f"{self.encoding.value}/{self.form.value}@{self.span[0]}:{self.span[1]}"
        return f"{text}/partial" if self.partial else text


class StorageObservation(FrozenModel):
    seq: int
    value: str
    source: str
    actor: str


class Node(FrozenModel):
    id: str
    kind: NodeKind
    attrs: Dict[str, Any] = {}

    @property
    def decoration(self) -> Optional[LinkDecoration]:
        return self.attrs.get("decoration")

    @property
    def seq(self) -> Optional[int]:
        return self.attrs.get("seq")

    @property
    def is_request(self) -> bool:
        return self.kind == NodeKind.NETWORK and self.attrs.get("direction") == Direction.REQUEST


class Edge(FrozenModel):
    src: str
    dst: str
    kind: EdgeKind
    subkind: Optional[InteractionKind] = None
    evidence: Optional[Evidence] = None
    count: int = 1

    @property
    def key(self) -> Tuple[str, str, str, str]:
        return self.src, self.dst, self.kind.value, self.subkind.value if self.subkind else ""

    @property
    def label(self) -> str:
        return f"{self.kind.value}:{self.subkind.value}" if self.subkind else self.kind.value

    @property
    def is_flow(self) -> bool:
        return self.kind in FLOW_KINDS


class PageGraph(FrozenModel):
    """
    Cross-layer graph of one page load.
    Operations never change a graph in place: they return a new one through replace().
    """

    trace_id: str = ""
    site: str = ""
    page_url: str = ""
    nodes: Dict[str, Node] = {}
    edges: List[Edge] = []
    warnings: List[str] = []
    marks: Dict[str, FrozenSet[str]] = {}
    storage_history: Dict[str, List[StorageObservation]] = {}
    decorations_attached: bool = False
    _adjacency: Optional[Tuple[Dict[str, List[Edge]], Dict[str, List[Edge]]]] = PrivateAttr(default=None)

    def replace(self, **changes) -> "PageGraph":
        graph = self.copy(update=changes)
        graph._adjacency = None
        return graph

    def adjacency(self) -> Tuple[Dict[str, List[Edge]], Dict[str, List[Edge]]]:
        """Edges by destination and by source, in edge order, indexed on first use"""
        if self._adjacency is None:
            into: Dict[str, List[Edge]] = defaultdict(list)
            out: Dict[str, List[Edge]] = defaultdict(list)

            for edge in self.edges:
                into[edge.dst].append(edge)
                out[edge.src].append(edge)

            self._adjacency = dict(into), dict(out)

        return self._adjacency

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError as exc:
            raise NotFoundError(f"node {node_id!r} is not in graph {self.trace_id!r}") from exc

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def nodes_of(self, kind: NodeKind) -> List[Node]:
        return [node for node in self.nodes.values() if node.kind == kind]

    def decoration_nodes(self) -> List[Node]:
        return self.nodes_of(NodeKind.DECORATION)

    def request_nodes(self) -> List[Node]:
        return [node for node in self.nodes.values() if node.is_request]

    def response_nodes(self) -> List[Node]:
        return [
            node
            for node in self.nodes.values()
            if node.kind == NodeKind.NETWORK and node.attrs.get("direction") == Direction.RESPONSE
        ]

    def flow_edges(self) -> List[Edge]:
        return [edge for edge in self.edges if edge.is_flow]

    def edges_of(self, kind: EdgeKind) -> List[Edge]:
        return [edge for edge in self.edges if edge.kind == kind]

    def edges_into(self, node_id: str) -> Iterator[Edge]:
        return iter(self.adjacency()[0].get(node_id, ()))

    def edges_from(self, node_id: str) -> Iterator[Edge]:
        return iter(self.adjacency()[1].get(node_id, ()))

    def parent_request(self, decoration_node_id: str) -> Node:
        for edge in self.edges_into(decoration_node_id):
            if edge.subkind == InteractionKind.DECORATES:
                return self.node(edge.src)

        raise NotFoundError(f"decoration {decoration_node_id!r} has no parent request")

    def marks_of(self, node_id: str) -> FrozenSet[str]:
        return self.marks.get(node_id, frozenset())


__all__ = [
    "NodeKind",
    "EdgeKind",
    "InteractionKind",
    "Encoding",
    "MatchForm",
    "Direction",
    "Evidence",
    "StorageObservation",
    "Node",
    "Edge",
    "PageGraph",
    "INFILTRATING",
    "INFILTRATING_PARENT",
    "FLOW_KINDS",
    "storage_node_id",
    "script_node_id",
    "html_node_id",
    "request_node_id",
    "response_node_id",
    "decoration_node_id",
]
