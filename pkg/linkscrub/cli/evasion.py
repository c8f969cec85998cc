import csv
import hashlib
import io
import logging
from typing import Callable, Dict, Iterable, List, Set, Tuple
from urllib.parse import quote

import numpy as np

from linkscrub.core.exceptions import NotFoundError, UrlParsingError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.labels.models import Label
from linkscrub.traces.models import REQUEST_KINDS, EventKind, Trace, TraceEvent
from linkscrub.urls.models import (
    DecoratedUrl,
    DecorationId,
    KeyValue,
    UrlToken,
    fragment_key,
    path_key,
    query_key,
)
from linkscrub.urls.parsing import decompose, name_decorations, reassemble

logger = logging.getLogger(__name__)

CHUNK_LENGTH = 8
ORIGIN_COLUMNS = ["site", "fqdn", "key", "origins"]

Origins = Dict[DecorationId, Set[DecorationId]]
UrlRewrite = Callable[[DecoratedUrl, str], Tuple[DecoratedUrl, List[Tuple[str, List[str]]]]]


class EvadedCorpus(BaseModel):
    """Rewritten traces. origins maps every new DecorationId to the ids it was made from."""

    traces: List[Trace] = []
    origins: Origins = {}

    def carry_labels(self, labels: Dict[DecorationId, Label]) -> Dict[DecorationId, Label]:
        """A new id is ATS when any origin is, otherwise NonATS when any origin is"""
        carried = {}

        for new_id, old_ids in self.origins.items():
            old_labels = {labels.get(old_id, Label.UNKNOWN) for old_id in old_ids}
            if Label.ATS in old_labels:
                carried[new_id] = Label.ATS
            elif Label.NON_ATS in old_labels:
                carried[new_id] = Label.NON_ATS

        return carried

    def carry_ids(self, ids: Iterable[DecorationId]) -> Set[DecorationId]:
        ids = set(ids)
        return {new_id for new_id, old_ids in self.origins.items() if old_ids & ids}

    def dumps_origins(self) -> str:
        """CSV of new ids, sorted, with the keys they were made from joined by `;`"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(ORIGIN_COLUMNS)

        for new_id in sorted(self.origins):
            old_keys = sorted(old_id.key for old_id in self.origins[new_id])
            writer.writerow([new_id.site, new_id.fqdn, new_id.key, ";".join(old_keys)])

        return buffer.getvalue()


class EvasionTechnique(FrozenModel):
    name: str
    description: str = ""
    evade: Callable[..., EvadedCorpus]


registry: Dict[str, EvasionTechnique] = {}


def register_technique(technique: EvasionTechnique):
    registry[technique.name] = technique


def unregister_technique(name: str):
    try:
        del registry[name]
    except KeyError:
        raise NotFoundError(f"Evasion technique {name} was not found")


def get_technique(name: str) -> EvasionTechnique:
    try:
        return registry[name]
    except KeyError:
        raise NotFoundError(f"Evasion technique {name!r} was not found, known: {sorted(registry)}")


def evade(name: str, traces: List[Trace], seed: int = 0) -> EvadedCorpus:
    return get_technique(name).evade(traces, seed=seed)


def _rewrite_url(event: TraceEvent, url: str) -> TraceEvent:
    if event.kind == EventKind.REDIRECT:
        return event.copy(update={"payload": event.payload.copy(update={"to_url": url})})

    return event.copy(update={"payload": event.payload.copy(update={"url": url})})


def rewrite_traces(traces: Iterable[Trace], rewrite: UrlRewrite) -> EvadedCorpus:
    """
    Applies a URL rewrite to every request, element request and redirect hop.
    The rewrite returns the new URL and, for every new decoration key, the keys it came from.
    URLs that do not parse are kept as they are.
    """
    corpus = EvadedCorpus()

    for trace in traces:
        events = []

        for event in trace.events:
            if event.kind not in REQUEST_KINDS and event.kind != EventKind.REDIRECT:
                events.append(event)
                continue

            try:
                decorated = decompose(event.url, event.site)
            except UrlParsingError as exc:
                logger.warning("Keeping unparseable URL in %s: %s", trace.trace_id, exc)
                events.append(event)
                continue

            rewritten, key_origins = rewrite(decorated, event.site)
            for new_key, old_keys in key_origins:
                new_id = DecorationId(site=event.site, fqdn=decorated.fqdn, key=new_key)
                corpus.origins.setdefault(new_id, set()).update(
                    DecorationId(site=event.site, fqdn=decorated.fqdn, key=old_key) for old_key in old_keys
                )

            events.append(_rewrite_url(event, reassemble(rewritten)))

        corpus.traces.append(trace.copy(update={"events": events}))

    return corpus


def _stable_digest(*parts: object) -> bytes:
    return hashlib.sha256("|".join(str(part) for part in parts).encode("utf-8")).digest()


def rename_url(decorated: DecoratedUrl, site: str, seed: int) -> Tuple[DecoratedUrl, List[Tuple[str, List[str]]]]:
    origins = []

    def token(key: str) -> str:
        return "k" + _stable_digest(seed, decorated.fqdn, key).hex()[:10]

    depth = decorated.depth
    order = list(range(depth))
    if depth > 1:
        rng = np.random.default_rng(int.from_bytes(_stable_digest(seed, decorated.fqdn, depth)[:8], "big"))
        order = [int(level) for level in rng.permutation(depth)]

    path_segments = [decorated.path_segments[old] for old in order]
    origins.extend((path_key(new), [path_key(old)]) for new, old in enumerate(order))

    query_params = []
    for param in decorated.query_params:
        if param.is_empty:
            query_params.append(param)
            continue

        new_key = token(query_key(param.key))
        query_params.append(param.copy(update={"key": new_key, "raw_key": new_key}))
        origins.append((query_key(new_key), [query_key(param.key)]))

    fragment_params = None
    if decorated.fragment_params is not None:
        fragment_params = []
        for param in decorated.fragment_params:
            new_key = token(fragment_key(param.key))
            fragment_params.append(param.copy(update={"key": new_key, "raw_key": new_key}))
            origins.append((fragment_key(new_key), [fragment_key(param.key)]))
    elif decorated.fragment is not None and decorated.fragment.raw:
        origins.append((fragment_key(), [fragment_key()]))

    renamed = decorated.copy(
        update={"path_segments": path_segments, "query_params": query_params, "fragment_params": fragment_params}
    )
    return renamed, origins


def evade_rename(traces: List[Trace], seed: int = 0) -> EvadedCorpus:
    """
    Query and fragment keys become random tokens, consistent per (fqdn, key).
    Path levels are permuted, consistently per (fqdn, depth). Values are untouched.
    """
    return rewrite_traces(traces, lambda decorated, site: rename_url(decorated, site, seed))


def chunks(value: str, length: int = CHUNK_LENGTH) -> List[str]:
    return [value[start : start + length] for start in range(0, len(value), length)]


def _split_pairs(params: List[KeyValue], make_key: Callable[[str], str], origins: list) -> List[KeyValue]:
    split = []

    for param in params:
        if param.is_empty or len(param.value) <= CHUNK_LENGTH:
            split.append(param)
            if not param.is_empty:
                origins.append((make_key(param.key), [make_key(param.key)]))
            continue

        for index, chunk in enumerate(chunks(param.value)):
            key = f"{param.key}_{index}"
            raw_key = f"{param.raw_key}_{index}"
            split.append(KeyValue(key=key, value=chunk, raw_key=raw_key, raw_value=quote(chunk, safe="")))
            origins.append((make_key(key), [make_key(param.key)]))

    return split


def split_url(decorated: DecoratedUrl, site: str) -> Tuple[DecoratedUrl, List[Tuple[str, List[str]]]]:
    origins = []

    path_segments = []
    for level, segment in enumerate(decorated.path_segments):
        pieces = [segment]
        if len(segment.value) > CHUNK_LENGTH:
            pieces = [UrlToken(value=piece, raw=quote(piece, safe="")) for piece in chunks(segment.value)]

        for piece in pieces:
            origins.append((path_key(len(path_segments)), [path_key(level)]))
            path_segments.append(piece)

    query_params = _split_pairs(decorated.query_params, query_key, origins)

    fragment, fragment_params = decorated.fragment, decorated.fragment_params
    if fragment_params is not None:
        fragment_params = _split_pairs(fragment_params, fragment_key, origins)
    elif fragment is not None and fragment.raw:
        if len(fragment.value) > CHUNK_LENGTH:
            fragment_params = _split_pairs(
                [KeyValue(key="fragment", value=fragment.value, raw_key="fragment", raw_value=fragment.raw)],
                lambda key: fragment_key(key),
                [],
            )
            fragment = None
            origins.extend((fragment_key(param.key), [fragment_key()]) for param in fragment_params)
        else:
            origins.append((fragment_key(), [fragment_key()]))

    split = decorated.copy(
        update={
            "path_segments": path_segments,
            "query_params": query_params,
            "fragment": fragment,
            "fragment_params": fragment_params,
        }
    )
    return split, origins


def evade_split(traces: List[Trace], seed: int = 0) -> EvadedCorpus:
    """
    Every decoration value longer than 8 characters becomes ceil(len / 8) decorations carrying
    consecutive chunks: `<key>_<i>` for query and fragment pairs, `fragment_<i>` for a singular
    fragment and extra levels for path segments.
    """
    return rewrite_traces(traces, split_url)


def combined_value(decorated: DecoratedUrl, site: str) -> str:
    pairs = "&".join(f"{decoration.id.key}={decoration.value}" for decoration in name_decorations(decorated, site))
    return hashlib.sha256(pairs.encode("utf-8")).hexdigest()


def combine_url(decorated: DecoratedUrl, site: str) -> Tuple[DecoratedUrl, List[Tuple[str, List[str]]]]:
    decorations = name_decorations(decorated, site)
    if not decorations:
        return decorated, []

    value = combined_value(decorated, site)
    combined = decorated.copy(
        update={
            "leading_slash": True,
            "path_segments": [UrlToken.plain(value)],
            "has_query": False,
            "query_params": [],
            "has_fragment": False,
            "fragment": None,
            "fragment_params": None,
        }
    )
    return combined, [(path_key(0), [decoration.id.key for decoration in decorations])]


def evade_combine(traces: List[Trace], seed: int = 0) -> EvadedCorpus:
    """All decorations of a request become one path level holding the SHA-256 of its key=value pairs"""
    return rewrite_traces(traces, combine_url)


register_technique(
    EvasionTechnique(name="rename", description="randomize keys and permute path levels", evade=evade_rename)
)
register_technique(
    EvasionTechnique(name="split", description="split long values into 8 character chunks", evade=evade_split)
)
register_technique(
    EvasionTechnique(name="combine", description="hash all decorations into one path level", evade=evade_combine)
)


__all__ = [
    "EvadedCorpus",
    "EvasionTechnique",
    "registry",
    "register_technique",
    "unregister_technique",
    "get_technique",
    "evade",
    "rewrite_traces",
    "rename_url",
    "split_url",
    "combine_url",
    "combined_value",
    "chunks",
    "evade_rename",
    "evade_split",
    "evade_combine",
    "CHUNK_LENGTH",
    "ORIGIN_COLUMNS",
]
