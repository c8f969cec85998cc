import base64
import hashlib
import json

import pytest

from linkscrub.cli.synthetic import SyntheticConfig, generate_synthetic
from linkscrub.core.exceptions import InvariantViolation, NotFoundError
from linkscrub.graph import (
    INFILTRATING,
    INFILTRATING_PARENT,
    EdgeKind,
    Encoding,
    InteractionKind,
    MatchForm,
    NodeKind,
    attach_decoration_nodes,
    build_graph,
    detect_exfiltration,
    dump_graph,
    encode_candidates,
    flow_view,
    interaction_view,
    page_graph,
    page_graphs,
)
from linkscrub.traces import parse_trace
from tests.conftest import UID_VALUE, acceptance_scale, trace_lines


def flow_pairs(graph, kind):
    return {(edge.src, edge.dst): edge for edge in graph.edges_of(kind)}


def test_node_kinds(sync_graph):
    counts = {kind: len(sync_graph.nodes_of(kind)) for kind in NodeKind}

    assert len(sync_graph.nodes) == 15
    assert counts == {
        NodeKind.SCRIPT: 1,
        NodeKind.STORAGE: 2,
        NodeKind.NETWORK: 6,
        NodeKind.HTML: 0,
        NodeKind.DECORATION: 6,
    }


def test_edge_counts(sync_graph):
    assert len(sync_graph.edges_of(EdgeKind.INTERACTION)) == 14
    assert len(sync_graph.edges_of(EdgeKind.EXFILTRATION)) == 3
    assert len(sync_graph.edges_of(EdgeKind.INFILTRATION)) == 1
    assert interaction_view(sync_graph).number_of_edges() == 18


def test_exfiltration_edges(sync_graph):
    edges = flow_pairs(sync_graph, EdgeKind.EXFILTRATION)

    assert set(edges) == {
        ("storage|cookie|info", "decoration|r1|query|0"),
        ("storage|cookie|uid", "decoration|r2|path|1"),
        ("storage|cookie|uid", "decoration|r3|query|0"),
    }
    assert edges[("storage|cookie|info", "decoration|r1|query|0")].evidence.encoding == Encoding.PLAIN
    assert edges[("storage|cookie|uid", "decoration|r2|path|1")].evidence.encoding == Encoding.PLAIN

    base64_evidence = edges[("storage|cookie|uid", "decoration|r3|query|0")].evidence
    assert base64_evidence.encoding == Encoding.BASE64
    assert base64_evidence.form == MatchForm.DECODED
    assert base64_evidence.value == UID_VALUE


def test_infiltration_edge_and_marks(sync_graph):
    edges = flow_pairs(sync_graph, EdgeKind.INFILTRATION)

    assert list(edges) == [("response|r1", "storage|cookie|uid")]
    assert edges[("response|r1", "storage|cookie|uid")].evidence.form == MatchForm.BODY
    assert INFILTRATING in sync_graph.marks_of("request|r1")
    assert INFILTRATING_PARENT in sync_graph.marks_of("decoration|r1|query|0")
    assert sync_graph.marks_of("request|r2") == frozenset()


def test_decoration_children(sync_graph):
    children = [edge.dst for edge in sync_graph.edges_from("request|r2") if edge.subkind == InteractionKind.DECORATES]

    assert children == ["decoration|r2|path|0", "decoration|r2|path|1", "decoration|r2|query|0"]
    assert sync_graph.parent_request("decoration|r2|path|1").id == "request|r2"
    assert [sync_graph.node(node_id).attrs["depth"] for node_id in children] == [1, 2, 3]
    assert sync_graph.node("decoration|r3|fragment|0").attrs["depth"] == 2


def test_example_url_has_five_decoration_children():
    url = "https://a.site.example/YYY/ZZZ/pixel.jpg?ISBN=ABC&UID=DEF123#xyz"
    text = trace_lines(
        [("script_load", {"url": "https://pub.example/t.js"}), ("request", {"request_id": "r1", "url": url})],
        site="pub.example",
        page_url="https://pub.example/",
    )
    graph = page_graph(parse_trace(text))

    assert len(graph.decoration_nodes()) == 5


def test_flow_view(sync_graph):
    view = flow_view(sync_graph)

    assert view.number_of_nodes() == 10
    assert view.number_of_edges() == 10
    assert "decoration|r2|path|0" not in view


def test_graph_operations_do_not_mutate(sync_trace):
    base = build_graph(sync_trace)
    attached = attach_decoration_nodes(base)

    assert not base.decoration_nodes()
    assert attach_decoration_nodes(attached) is attached
    assert detect_exfiltration(attached).edges_of(EdgeKind.EXFILTRATION)
    assert not attached.edges_of(EdgeKind.EXFILTRATION)


def test_exfiltration_is_idempotent(sync_graph):
    again = detect_exfiltration(sync_graph)

    assert len(again.edges_of(EdgeKind.EXFILTRATION)) == 3


def test_min_len_filters_short_values():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("storage_set", {"store": "cookie", "key": "id", "value": "abc12"}),
        ("request", {"request_id": "r1", "url": "https://t.example/c?v=abc12"}),
    ]
    trace = parse_trace(trace_lines(events))

    assert not page_graph(trace).edges_of(EdgeKind.EXFILTRATION)
    assert page_graph(trace, min_len=0).edges_of(EdgeKind.EXFILTRATION)


def test_partial_matching_finds_chunks():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("storage_set", {"store": "localStorage", "key": "id", "value": "ABCDEFGH12345678"}),
        ("request", {"request_id": "r1", "url": "https://t.example/c?v_0=ABCDEFGH&v_1=12345678"}),
    ]
    trace = parse_trace(trace_lines(events))

    assert not page_graph(trace).edges_of(EdgeKind.EXFILTRATION)

    edges = page_graph(trace, min_len=0, partial=True).edges_of(EdgeKind.EXFILTRATION)
    assert len(edges) == 2
    assert all(edge.evidence.partial for edge in edges)


def test_values_stored_after_the_request_do_not_count():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("request", {"request_id": "r1", "url": "https://t.example/c?v=LATEVALUE123"}),
        ("storage_set", {"store": "cookie", "key": "id", "value": "LATEVALUE123"}),
    ]

    assert not page_graph(parse_trace(trace_lines(events))).edges_of(EdgeKind.EXFILTRATION)


def test_header_set_storage_infiltrates():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("request", {"request_id": "r1", "url": "https://t.example/init"}),
        (
            "response",
            {"request_id": "r1", "set_storage": [{"store": "cookie", "key": "tid", "value": "HEADERVAL123"}]},
        ),
        ("request", {"request_id": "r2", "url": "https://t.example/c?tid=HEADERVAL123"}),
    ]
    graph = page_graph(parse_trace(trace_lines(events)))
    infiltration = graph.edges_of(EdgeKind.INFILTRATION)

    assert [(edge.src, edge.dst) for edge in infiltration] == [("response|r1", "storage|cookie|tid")]
    assert infiltration[0].evidence.form == MatchForm.HEADER
    assert [(edge.src, edge.dst) for edge in graph.edges_of(EdgeKind.EXFILTRATION)] == [
        ("storage|cookie|tid", "decoration|r2|query|0")
    ]


def test_redirect_hops_are_requests():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("request", {"request_id": "r1", "url": "https://a.example/s?x=1"}),
        ("redirect", {"from_request_id": "r1", "to_url": "https://b.example/s?y=2", "request_id": "r2"}),
        ("response", {"request_id": "r2"}),
    ]
    graph = page_graph(parse_trace(trace_lines(events)))

    assert {node.id for node in graph.request_nodes()} == {"request|r1", "request|r2"}
    redirects = [edge for edge in graph.edges if edge.subkind == InteractionKind.REDIRECTS]
    assert [(edge.src, edge.dst) for edge in redirects] == [("request|r1", "request|r2")]


def test_element_requests_hang_off_html_nodes():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("element_create", {"element_id": "img1", "tag": "img"}),
    ]
    lines = trace_lines(events).splitlines()
    record = json.loads(lines[-1])
    record.update(
        seq=3,
        kind="element_request",
        actor="img1",
        payload={"request_id": "r1", "url": "https://cdn.example/i.png?w=3"},
    )
    lines.append(json.dumps(record))
    graph = page_graph(parse_trace(lines))

    assert graph.node("html|img1").kind == NodeKind.HTML
    assert [edge.subkind for edge in graph.edges_into("request|r1")] == [InteractionKind.INITIATES]
    assert next(graph.edges_into("request|r1")).src == "html|img1"


def test_unparseable_request_url_is_a_warning():
    events = [
        ("script_load", {"url": "https://pub.example/t.js"}),
        ("request", {"request_id": "r1", "url": "data-no-authority"}),
    ]
    graph = page_graph(parse_trace(trace_lines(events)))

    assert not graph.decoration_nodes()
    assert len(graph.warnings) == 1


def test_encode_candidates():
    candidates = dict(encode_candidates("abc"))

    assert candidates[Encoding.PLAIN] == "abc"
    assert candidates[Encoding.BASE64] == base64.b64encode(b"abc").decode()
    assert candidates[Encoding.MD5] == hashlib.md5(b"abc").hexdigest()
    assert candidates[Encoding.SHA1] == hashlib.sha1(b"abc").hexdigest()
    assert candidates[Encoding.SHA256] == hashlib.sha256(b"abc").hexdigest()

    with pytest.raises(InvariantViolation):
        encode_candidates("")


def test_missing_node(sync_graph):
    with pytest.raises(NotFoundError):
        sync_graph.node("request|r99")


def test_dump_is_deterministic(sync_trace):
    first = dump_graph(page_graph(sync_trace))

    assert first == dump_graph(page_graph(sync_trace))
    assert first.startswith("# linkscrub graph dump v1\n")
    assert "E\tstorage|cookie|uid\tdecoration|r3|query|0\texfiltration\tbase64/decoded@0:16" in first


def oracle_exfiltration(graph, min_len=8):
    """Every (storage, decoration) pair with some earlier value of length >= min_len inside the decoration"""
    pairs = set()

    for decoration in graph.decoration_nodes():
        texts = {decoration.decoration.value, decoration.attrs["raw_value"]} - {""}

        for storage_id, history in graph.storage_history.items():
            values = [obs.value for obs in history if obs.seq < decoration.seq and len(obs.value) >= max(min_len, 1)]
            if any(
                contains(encoding, candidate, text)
                for value in values
                for encoding, candidate in encode_candidates(value)
                for text in texts
            ):
                pairs.add((storage_id, decoration.id))

    return pairs


def contains(encoding, candidate, text):
    if encoding in (Encoding.PLAIN, Encoding.BASE64):
        return candidate in text

    return candidate.lower() in text.lower()


def test_exfiltration_matches_brute_force(small_corpus):
    for graph in page_graphs(small_corpus.traces):
        assert set(flow_pairs(graph, EdgeKind.EXFILTRATION)) == oracle_exfiltration(graph)


@pytest.mark.slow
def test_exfiltration_matches_brute_force_at_scale():
    corpus = generate_synthetic(SyntheticConfig(sites=max(10, int(100 * acceptance_scale())), seed=11))

    for graph in page_graphs(corpus.traces):
        assert set(flow_pairs(graph, EdgeKind.EXFILTRATION)) == oracle_exfiltration(graph)


def test_edge_indexes_follow_the_edge_list(sync_graph):
    for node_id in sync_graph.nodes:
        assert list(sync_graph.edges_into(node_id)) == [edge for edge in sync_graph.edges if edge.dst == node_id]
        assert list(sync_graph.edges_from(node_id)) == [edge for edge in sync_graph.edges if edge.src == node_id]

    assert list(sync_graph.edges_into("absent")) == []


def test_replaced_graph_reindexes_its_edges(sync_graph):
    first = sync_graph.edges[0]
    assert first in list(sync_graph.edges_from(first.src))

    trimmed = sync_graph.replace(edges=sync_graph.edges[1:])

    assert first not in list(trimmed.edges_from(first.src))
    assert first in list(sync_graph.edges_from(first.src))
