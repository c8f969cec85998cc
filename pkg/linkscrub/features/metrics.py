import networkx as nx

from linkscrub.core.exceptions import NotFoundError
from linkscrub.core.models import FrozenModel


class GraphMetrics(FrozenModel):
    num_nodes: float = 0.0
    num_edges: float = 0.0
    nodes_per_edge: float = 0.0
    edges_per_node: float = 0.0
    in_degree: float = 0.0
    out_degree: float = 0.0
    degree: float = 0.0
    avg_degree_connectivity: float = 0.0
    closeness_centrality: float = 0.0
    eccentricity: float = 0.0
    num_ancestors: float = 0.0


def graph_metrics(view: nx.MultiDiGraph, node_id: str) -> GraphMetrics:
    """
    Metrics of a node within its weakly connected component.
    Degrees count typed edges of the multigraph, distances use the simple undirected component.
    """
    if node_id not in view:
        raise NotFoundError(f"node {node_id!r} is not in the view")

    component = nx.node_connected_component(view.to_undirected(as_view=True), node_id)
    subgraph = view.subgraph(component)
    num_nodes, num_edges = subgraph.number_of_nodes(), subgraph.number_of_edges()

    simple = nx.Graph(subgraph)
    simple.remove_edges_from(nx.selfloop_edges(simple))
    distances = nx.single_source_shortest_path_length(simple, node_id)
    neighbours = list(simple.neighbors(node_id))

    in_degree, out_degree = view.in_degree(node_id), view.out_degree(node_id)

    return GraphMetrics(
        num_nodes=num_nodes,
        num_edges=num_edges,
        nodes_per_edge=num_nodes / num_edges if num_edges else 0.0,
        edges_per_node=num_edges / num_nodes,
        in_degree=in_degree,
        out_degree=out_degree,
        degree=in_degree + out_degree,
        avg_degree_connectivity=(
            sum(simple.degree(neighbour) for neighbour in neighbours) / len(neighbours) if neighbours else 0.0
        ),
        closeness_centrality=(
            sum(1 / distance for distance in distances.values() if distance > 0) / (num_nodes - 1)
            if num_nodes > 1
            else 0.0
        ),
        eccentricity=max(distances.values()),
        num_ancestors=len(nx.ancestors(view, node_id)),
    )


__all__ = [
    "GraphMetrics",
    "graph_metrics",
]
