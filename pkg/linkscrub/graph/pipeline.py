from typing import Iterable, List

from linkscrub.graph.builder import attach_decoration_nodes, build_graph
from linkscrub.graph.flows import DEFAULT_MIN_LEN, detect_exfiltration, detect_infiltration
from linkscrub.graph.models import PageGraph
from linkscrub.traces.models import Trace


def page_graph(trace: Trace, min_len: int = DEFAULT_MIN_LEN, partial: bool = False) -> PageGraph:
    """Builds the graph of a trace with decorations and both kinds of flow edges"""
    graph = attach_decoration_nodes(build_graph(trace))
    graph = detect_exfiltration(graph, min_len=min_len, partial=partial)
    return detect_infiltration(graph)


def page_graphs(traces: Iterable[Trace], min_len: int = DEFAULT_MIN_LEN, partial: bool = False) -> List[PageGraph]:
    return [page_graph(trace, min_len=min_len, partial=partial) for trace in traces]


__all__ = [
    "page_graph",
    "page_graphs",
]
