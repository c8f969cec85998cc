from typing import Iterable

import networkx as nx

from linkscrub.graph.models import Edge, PageGraph


def _to_multigraph(graph: PageGraph, edges: Iterable[Edge], node_ids: Iterable[str]) -> nx.MultiDiGraph:
    view = nx.MultiDiGraph(trace_id=graph.trace_id)

    for node_id in node_ids:
        node = graph.nodes[node_id]
        view.add_node(node_id, kind=node.kind.value)

    for edge in edges:
        view.add_edge(edge.src, edge.dst, key=edge.label, kind=edge.kind.value, count=edge.count)

    return view


def interaction_view(graph: PageGraph) -> nx.MultiDiGraph:
    """Every node and every typed edge of the graph"""
    return _to_multigraph(graph, graph.edges, graph.nodes)


def flow_view(graph: PageGraph) -> nx.MultiDiGraph:
    """Flow edges plus the interaction edges touching a flow edge endpoint"""
    flow_edges = graph.flow_edges()
    endpoints = {node_id for edge in flow_edges for node_id in (edge.src, edge.dst)}
    incident = [
        edge for edge in graph.edges if not edge.is_flow and (edge.src in endpoints or edge.dst in endpoints)
    ]
    edges = [*flow_edges, *incident]
    touched = {node_id for edge in edges for node_id in (edge.src, edge.dst)}
    return _to_multigraph(graph, edges, [node_id for node_id in graph.nodes if node_id in touched])


__all__ = [
    "interaction_view",
    "flow_view",
]
