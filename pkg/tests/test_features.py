import math

import hypothesis.strategies as st
import networkx as nx
import numpy as np
import pytest
from hypothesis import given

from linkscrub.core.exceptions import FeatureVersionError, NotFoundError, ParsingError
from linkscrub.features import (
    COMBINE_INVARIANT_FEATURES,
    FEATURE_NAMES,
    FeatureVector,
    GraphMetrics,
    KeywordLists,
    build_feature_matrix,
    default_keywords,
    extract_all,
    extract_features,
    graph_metrics,
    keyword_matches,
    parse_feature_matrix,
    shannon_entropy,
)
from linkscrub.graph import dump_graph, page_graphs

R1_QUERY = "decoration|r1|query|0"


@pytest.mark.parametrize(
    "text, expected",
    [("", 0.0), ("aaaa", 0.0), ("abab", 1.0), ("DEF123", math.log2(6)), ("a1b2c3d4e5f6", math.log2(12))],
)
def test_entropy_closed_forms(text, expected):
    assert shannon_entropy(text) == pytest.approx(expected, abs=1e-9)


@given(st.text(min_size=1, max_size=40))
def test_entropy_ignores_character_order(text):
    assert shannon_entropy(text) == pytest.approx(shannon_entropy(text[::-1]), abs=1e-9)


@given(st.text(min_size=1, max_size=40))
def test_entropy_is_bounded_by_distinct_characters(text):
    entropy = shannon_entropy(text)

    assert 0.0 <= entropy <= math.log2(len(set(text))) + 1e-9


@given(st.text(alphabet="abcdef", min_size=1, max_size=20))
def test_entropy_ignores_renaming_characters(text):
    renamed = text.translate(str.maketrans("abcdef", "UVWXYZ"))

    assert shannon_entropy(renamed) == pytest.approx(shannon_entropy(text), abs=1e-9)


def test_graph_metrics_by_hand():
    view = nx.MultiDiGraph([("a", "b"), ("a", "b"), ("b", "c"), ("d", "c")])
    view.add_node("e")

    assert graph_metrics(view, "c") == GraphMetrics(
        num_nodes=4,
        num_edges=4,
        nodes_per_edge=1.0,
        edges_per_node=1.0,
        in_degree=2,
        out_degree=0,
        degree=2,
        avg_degree_connectivity=1.5,
        closeness_centrality=2.5 / 3,
        eccentricity=2,
        num_ancestors=3,
    )
    assert graph_metrics(view, "e") == GraphMetrics(num_nodes=1, edges_per_node=0.0)

    with pytest.raises(NotFoundError):
        graph_metrics(view, "z")


def test_sync_trace_query_features(sync_graph):
    vector = extract_features(sync_graph, R1_QUERY)

    assert vector["cookie_exfiltrations"] == 1
    assert vector["parent_cookie_infiltrations"] == 1
    assert vector["setter_exfiltrations"] == 2
    assert vector["shannon_entropy"] == pytest.approx(math.log2(12))
    assert vector["max_decoration_depth"] == 1
    assert vector["descendant_of_script"] == 1
    assert vector["num_script_predecessors"] == 1
    assert vector["ancestor_script_length"] == 1200
    assert vector["ancestor_ad_keyword"] == 0
    assert vector["ancestor_fp_keyword"] == 0
    assert vector["parent_is_eval"] == 0
    assert vector["parent_cookie_gets"] == 1
    assert vector["parent_cookie_sets"] == 1
    assert vector["parent_ls_sets"] == 0
    assert vector["common_storage_access"] == 2
    assert vector["parent_requests_sent"] == 3
    assert vector["parent_requests_received"] == 3
    assert vector["parent_redirects_sent"] == 0
    assert vector["setter_redirects"] == 0


def test_sync_trace_structure_features(sync_graph):
    vector = extract_features(sync_graph, R1_QUERY)

    assert vector["num_nodes"] == 15
    assert vector["num_edges"] == 18
    assert vector["in_degree"] == 2
    assert vector["out_degree"] == 0
    assert vector["degree"] == 2
    assert vector["num_ancestors"] == 3
    assert vector["flow_num_nodes"] == 10
    assert vector["flow_num_edges"] == 10
    assert vector["flow_in_degree"] == 2


def test_depth_feature_by_kind(sync_graph):
    depths = {row.node_id: row.vector["max_decoration_depth"] for row in extract_all(sync_graph)}

    assert depths["decoration|r2|path|0"] == 1
    assert depths["decoration|r2|path|1"] == 2
    assert depths["decoration|r2|query|0"] == 3
    assert depths["decoration|r3|fragment|0"] == 2


def test_decorations_outside_flows_have_zero_flow_metrics(sync_graph):
    vector = extract_features(sync_graph, "decoration|r2|path|0")

    assert vector["cookie_exfiltrations"] == 0
    assert all(vector[f"flow_{name}"] == 0 for name in ["num_nodes", "in_degree", "eccentricity"])


def dump_degrees(dump: str):
    """In and out degree of every node, recounted from the edge lines of a graph dump"""
    degrees = {}

    for line in dump.splitlines():
        if not line.startswith("E\t"):
            continue

        _, src, dst, label, _ = line.split("\t")
        degrees.setdefault(src, [0, 0, 0])[1] += 1
        degrees.setdefault(dst, [0, 0, 0])[0] += 1
        if label == "exfiltration":
            degrees[dst][2] += 1

    return degrees


def test_degrees_agree_with_the_dump(sync_graph):
    degrees = dump_degrees(dump_graph(sync_graph))

    for row in extract_all(sync_graph):
        in_degree, out_degree, exfiltrations = degrees.get(row.node_id, [0, 0, 0])
        assert row.vector["in_degree"] == in_degree
        assert row.vector["out_degree"] == out_degree
        assert row.vector["cookie_exfiltrations"] == exfiltrations


def test_decorations_of_one_request_share_combine_invariant_features(sync_graph):
    rows = [row for row in extract_all(sync_graph) if row.node_id.startswith("decoration|r2|")]

    for name in COMBINE_INVARIANT_FEATURES:
        assert len({row.vector[name] for row in rows}) == 1, name


def test_extract_rejects_non_decorations(sync_graph):
    with pytest.raises(NotFoundError):
        extract_features(sync_graph, "request|r1")


def test_vector_needs_every_feature():
    with pytest.raises(ValueError):
        FeatureVector(values={"num_nodes": 1.0})

    with pytest.raises(ValueError):
        FeatureVector(values={**{name: 0.0 for name in FEATURE_NAMES}, "num_nodes": math.inf})


def test_vector_order_follows_feature_names(sync_graph):
    vector = extract_features(sync_graph, R1_QUERY)

    assert vector.as_array().shape == (len(FEATURE_NAMES),)
    assert vector.as_array(["in_degree", "num_nodes"]).tolist() == [2.0, 15.0]


@pytest.mark.parametrize(
    "keyword, url, expected",
    [
        ("ad", "https://cdn.example/ads/tag.js", True),
        ("ad", "https://cdn.example/loader.js", False),
        ("ad", "https://cdn.example/adsrv.js", True),
        ("canvas", "https://x.example/mycanvasfp.js", True),
        ("pixel", "https://x.example/js/PIXEL.js", True),
    ],
)
def test_keyword_matching(keyword, url, expected):
    assert keyword_matches(keyword, url) is expected


def test_keyword_lists():
    keywords = KeywordLists(ad=[" Track "], fingerprint=["webgl"])

    assert keywords.ad == ["track"]
    assert keywords.is_ad("https://t.example/tracker.js")
    assert keywords.is_fingerprint("https://t.example/webgl-probe.js")
    assert not default_keywords().is_ad("https://www.example.com/js/app.js")


def test_keyword_file(tmp_path):
    path = tmp_path / "keywords.json"
    path.write_text('{"ad": ["promo"], "fingerprint": ["probe"]}', encoding="utf-8")

    assert KeywordLists.load(path).ad == ["promo"]

    with pytest.raises(ParsingError):
        KeywordLists.load(tmp_path / "missing.json")


def test_matrix_text_round_trip(small_corpus):
    matrix = build_feature_matrix(page_graphs(small_corpus.traces))
    parsed = parse_feature_matrix(matrix.dumps())

    assert parsed.rows == matrix.rows
    assert parsed.feature_names == FEATURE_NAMES
    assert np.array_equal(parsed.X, matrix.X)
    assert [row.trace_id for row in matrix.rows] == sorted(row.trace_id for row in matrix.rows)


def test_matrix_is_deterministic(small_corpus):
    first = build_feature_matrix(page_graphs(small_corpus.traces)).dumps()

    assert build_feature_matrix(page_graphs(small_corpus.traces)).dumps() == first


def test_matrix_version_mismatch(sync_graph):
    text = build_feature_matrix([sync_graph]).dumps().replace("trace_id@v1", "trace_id@v0", 1)

    with pytest.raises(FeatureVersionError):
        parse_feature_matrix(text)


def test_matrix_rejects_other_files():
    with pytest.raises(ParsingError):
        parse_feature_matrix("")

    with pytest.raises(ParsingError):
        parse_feature_matrix("site,fqdn,key\n")


def test_matrix_select(sync_graph):
    matrix = build_feature_matrix([sync_graph])
    selected = matrix.select(["in_degree", "shannon_entropy"])

    assert selected.X.shape == (6, 2)
    assert np.array_equal(selected.column("in_degree"), matrix.column("in_degree"))
