import json
from enum import Enum
from typing import Any, List

from linkscrub.core.constants import GRAPH_DUMP_VERSION
from linkscrub.graph.models import Node, PageGraph
from linkscrub.urls.models import LinkDecoration

GRAPH_DUMP_HEADER = f"# linkscrub graph dump v{GRAPH_DUMP_VERSION}"


def _plain_attr(value: Any) -> Any:
    if isinstance(value, LinkDecoration):
        return str(value)
    elif isinstance(value, (list, tuple)):
        return [_plain_attr(item) for item in value]
    elif isinstance(value, Enum):
        return value.value

    return value


def _node_line(node: Node) -> str:
    attrs = {key: _plain_attr(value) for key, value in node.attrs.items()}
    return "\t".join(["N", node.id, node.kind.value, json.dumps(attrs, sort_keys=True, ensure_ascii=False)])


def dump_graph(graph: PageGraph) -> str:
    """Deterministic text form of a graph: sorted node lines, then sorted edge lines"""
    node_lines = sorted(_node_line(node) for node in graph.nodes.values())
    edge_lines: List[str] = sorted(
        "\t".join(["E", edge.src, edge.dst, edge.label, edge.evidence.render() if edge.evidence else "-"])
        for edge in graph.edges
    )
    return "\n".join([GRAPH_DUMP_HEADER, *node_lines, *edge_lines]) + "\n"


__all__ = [
    "GRAPH_DUMP_HEADER",
    "dump_graph",
]
