import base64
import hashlib
import logging
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Tuple

from linkscrub.core.exceptions import InvariantViolation
from linkscrub.graph.models import (
    INFILTRATING,
    INFILTRATING_PARENT,
    Edge,
    EdgeKind,
    Encoding,
    Evidence,
    InteractionKind,
    MatchForm,
    Node,
    PageGraph,
    StorageObservation,
    request_node_id,
    storage_node_id,
)

logger = logging.getLogger(__name__)

DEFAULT_MIN_LEN = 8
DIGESTS = frozenset({Encoding.MD5, Encoding.SHA1, Encoding.SHA256})


@lru_cache(maxsize=65536)
def encode_candidates(value: str) -> Tuple[Tuple[Encoding, str], ...]:
    """The five monitored forms of a value, in matching order"""
    if not value:
        raise InvariantViolation("encode_candidates() needs a non-empty value")

    data = value.encode("utf-8")
    return (
        (Encoding.PLAIN, value),
        (Encoding.BASE64, base64.b64encode(data).decode("ascii")),
        (Encoding.MD5, hashlib.md5(data).hexdigest()),
        (Encoding.SHA1, hashlib.sha1(data).hexdigest()),
        (Encoding.SHA256, hashlib.sha256(data).hexdigest()),
    )


def find_encoded(encoding: Encoding, needle: str, haystack: str) -> Optional[Tuple[int, int]]:
    """Hex digests match case-insensitively, plain and base64 text exactly"""
    if encoding in DIGESTS:
        needle, haystack = needle.lower(), haystack.lower()

    start = haystack.find(needle)
    return None if start < 0 else (start, start + len(needle))


def _values_before(history: List[StorageObservation], seq: int, min_len: int) -> List[str]:
    values = []

    for observation in history:
        if observation.seq >= seq:
            break
        elif observation.value and len(observation.value) >= min_len and observation.value not in values:
            values.append(observation.value)

    return values


def match_exfiltration(
    values: List[str],
    forms: List[Tuple[MatchForm, str]],
    min_len: int = DEFAULT_MIN_LEN,
    partial: bool = False,
) -> Optional[Evidence]:
    """
    Searches storage values inside decoration values.
    Encodings are tried in order, the decoded form before the raw one, values in observation order.
    """
    for index, encoding in enumerate(Encoding):
        for form, text in forms:
            for value in values:
                span = find_encoded(encoding, encode_candidates(value)[index][1], text)
                if span is not None:
                    return Evidence(encoding=encoding, form=form, span=span, value=value)

    if not partial:
        return None

    for index, encoding in enumerate(Encoding):
        for form, text in forms:
            if len(text) < max(min_len, 1):
                continue

            for value in values:
                span = find_encoded(encoding, text, encode_candidates(value)[index][1])
                if span is not None:
                    return Evidence(encoding=encoding, form=form, span=span, value=value, partial=True)

    return None


def _decoration_forms(node: Node) -> List[Tuple[MatchForm, str]]:
    decoded = node.decoration.value
    raw = node.attrs.get("raw_value", decoded)
    forms = [(MatchForm.DECODED, decoded)]

    if raw != decoded:
        forms.append((MatchForm.RAW, raw))

    return [(form, text) for form, text in forms if text]


def detect_exfiltration(graph: PageGraph, min_len: int = DEFAULT_MIN_LEN, partial: bool = False) -> PageGraph:
    """
    Adds storage -> decoration edges when a storage value observed before the request
    appears, plain or encoded, inside a decoration value.
    """
    edges = [edge for edge in graph.edges if edge.kind != EdgeKind.EXFILTRATION]
    added = 0

    for decoration in graph.decoration_nodes():
        forms = _decoration_forms(decoration)
        if not forms:
            continue

        for storage_id, history in graph.storage_history.items():
            values = _values_before(history, decoration.seq, min_len)
            if not values:
                continue

            evidence = match_exfiltration(values, forms, min_len=min_len, partial=partial)
            if evidence is not None:
                edges.append(Edge(src=storage_id, dst=decoration.id, kind=EdgeKind.EXFILTRATION, evidence=evidence))
                added += 1

    logger.debug("Graph %s: %d exfiltration edges", graph.trace_id, added)
    return graph.replace(edges=edges)


def match_infiltration(value: str, body: str) -> Optional[Evidence]:
    for encoding, candidate in encode_candidates(value):
        span = find_encoded(encoding, candidate, body)
        if span is not None:
            return Evidence(encoding=encoding, form=MatchForm.BODY, span=span, value=value)

    return None


def detect_infiltration(graph: PageGraph) -> PageGraph:
    """
    Adds response -> storage edges for values set by response headers
    and for script writes of values that an earlier response body carried.
    """
    edges = [edge for edge in graph.edges if edge.kind != EdgeKind.INFILTRATION]
    found: Dict[Tuple[str, str], Edge] = {}
    responses = sorted(graph.response_nodes(), key=lambda node: node.seq)

    for response in responses:
        for store, key, value in response.attrs.get("set_storage", []):
            if not value:
                continue

            storage_id = storage_node_id(store, key)
            evidence = Evidence(encoding=Encoding.PLAIN, form=MatchForm.HEADER, span=(0, len(value)), value=value)
            found.setdefault(
                (response.id, storage_id),
                Edge(src=response.id, dst=storage_id, kind=EdgeKind.INFILTRATION, evidence=evidence),
            )

    for storage_id, history in graph.storage_history.items():
        for observation in history:
            if observation.source != "set" or not observation.value:
                continue

            for response in responses:
                body = response.attrs.get("body", "")
                if response.seq >= observation.seq or not body or (response.id, storage_id) in found:
                    continue

                evidence = match_infiltration(observation.value, body)
                if evidence is not None:
                    found[(response.id, storage_id)] = Edge(
                        src=response.id, dst=storage_id, kind=EdgeKind.INFILTRATION, evidence=evidence
                    )

    edges.extend(found.values())
    marks: Dict[str, FrozenSet[str]] = dict(graph.marks)

    for response_id, _ in found:
        request_id = request_node_id(graph.node(response_id).attrs["request_id"])
        marks[request_id] = marks.get(request_id, frozenset()) | {INFILTRATING}

        for edge in graph.edges_from(request_id):
            if edge.subkind == InteractionKind.DECORATES:
                marks[edge.dst] = marks.get(edge.dst, frozenset()) | {INFILTRATING_PARENT}

    logger.debug("Graph %s: %d infiltration edges", graph.trace_id, len(found))
    return graph.replace(edges=edges, marks=marks)


__all__ = [
    "DEFAULT_MIN_LEN",
    "encode_candidates",
    "find_encoded",
    "match_exfiltration",
    "match_infiltration",
    "detect_exfiltration",
    "detect_infiltration",
]
