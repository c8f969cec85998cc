import re
from typing import List, Optional
from urllib.parse import unquote

from linkscrub.core.exceptions import UrlParsingError
from linkscrub.urls.models import (
    DecoratedUrl,
    DecorationId,
    DecorationKind,
    KeyValue,
    LinkDecoration,
    UrlToken,
    fragment_key,
    path_key,
    query_key,
)

# generic URI grammar, split into scheme / authority / path / query / fragment
URI_RE = re.compile(r"^(?:([^:/?#]+):)?(?://([^/?#]*))?([^?#]*)(?:\?([^#]*))?(?:#(.*))?$", re.DOTALL)
SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*$")
REG_NAME_RE = re.compile(r"^[A-Za-z0-9._~%!$&'()*+,;=\-]+$")
IP_LITERAL_RE = re.compile(r"^\[[0-9A-Fa-f:.vV]+\]$")
FORBIDDEN_RE = re.compile(r"[\x00-\x20\x7f]")


def _decode(raw: str) -> str:
    return unquote(raw)


def _token(raw: str) -> UrlToken:
    return UrlToken(value=_decode(raw), raw=raw)


def _split_pairs(raw: str) -> List[KeyValue]:
    pairs = []

    for part in raw.split("&"):
        raw_key, equals, raw_value = part.partition("=")
        pairs.append(
            KeyValue(
                key=_decode(raw_key),
                value=_decode(raw_value),
                raw_key=raw_key,
                raw_value=raw_value,
                has_equals=bool(equals),
            )
        )

    return pairs


def _is_pair_fragment(raw: str) -> bool:
    return bool(raw) and all("=" in part for part in raw.split("&"))


def _parse_host(url: str, netloc: str, netloc_start: int) -> str:
    host_part = netloc.rpartition("@")[2]
    host_start = netloc_start + len(netloc) - len(host_part)

    if host_part.startswith("["):
        host, _, port_part = host_part.partition("]")
        host = f"{host}]"
        port = port_part[1:] if port_part.startswith(":") else port_part

        if port_part and not port_part.startswith(":"):
            raise UrlParsingError("invalid text after IP literal", url, (host_start, host_start + len(host_part)))
        elif not IP_LITERAL_RE.match(host):
            raise UrlParsingError("invalid IP literal", url, (host_start, host_start + len(host)))
    else:
        host, _, port = host_part.partition(":")

        if host and not REG_NAME_RE.match(host):
            raise UrlParsingError("invalid host", url, (host_start, host_start + len(host)))

    if not host:
        raise UrlParsingError("missing host", url, (netloc_start, netloc_start + len(netloc)))
    elif port and not port.isdigit():
        port_start = host_start + len(host_part) - len(port)
        raise UrlParsingError("invalid port", url, (port_start, port_start + len(port)))

    return host.lower()


def decompose(url: str, site: Optional[str] = None) -> DecoratedUrl:
    """
    Splits a URL into its base and link decorations.
    `site` is accepted for symmetry with name_decorations(), the decomposition does not depend on it.
    """
    forbidden = FORBIDDEN_RE.search(url)
    if forbidden is not None:
        raise UrlParsingError("whitespace or control character", url, (forbidden.start(), forbidden.end()))

    match = URI_RE.match(url)
    raw_scheme, netloc, path, query, fragment = match.groups()

    if raw_scheme is None or not SCHEME_RE.match(raw_scheme):
        end = url.find(":") if raw_scheme is not None else 0
        raise UrlParsingError("missing or invalid scheme", url, (0, max(end, 0)))
    elif netloc is None:
        start = len(raw_scheme) + 1
        raise UrlParsingError("missing authority", url, (start, start))

    fqdn = _parse_host(url, netloc, netloc_start=match.start(2))

    leading_slash = path.startswith("/")
    pieces = path[1:].split("/") if leading_slash else [path]

    return DecoratedUrl(
        raw=url,
        scheme=raw_scheme.lower(),
        raw_scheme=raw_scheme,
        netloc=netloc,
        fqdn=fqdn,
        leading_slash=leading_slash,
        path_segments=[_token(piece) for piece in pieces[:-1]],
        resource_name=_token(pieces[-1]),
        has_query=query is not None,
        query_params=_split_pairs(query) if query else [],
        has_fragment=fragment is not None,
        fragment=_token(fragment) if fragment is not None and not _is_pair_fragment(fragment) else None,
        fragment_params=_split_pairs(fragment) if fragment is not None and _is_pair_fragment(fragment) else None,
    )


def reassemble(decorated: DecoratedUrl) -> str:
    parts = [decorated.raw_scheme, "://", decorated.netloc]

    if decorated.leading_slash:
        pieces = [segment.raw for segment in decorated.path_segments]
        parts.append("/" + "/".join([*pieces, decorated.resource_name.raw]))
    else:
        parts.append(decorated.resource_name.raw)

    if decorated.has_query:
        parts.append("?" + "&".join(param.render() for param in decorated.query_params))

    if decorated.has_fragment:
        if decorated.fragment_params is not None:
            parts.append("#" + "&".join(param.render() for param in decorated.fragment_params))
        else:
            parts.append("#" + (decorated.fragment.raw if decorated.fragment is not None else ""))

    return "".join(parts)


def name_decorations(decorated: DecoratedUrl, site: str) -> List[LinkDecoration]:
    decorations = []

    def add(key: str, kind: DecorationKind, value: str, position: int):
        decorations.append(
            LinkDecoration(
                id=DecorationId(site=site, fqdn=decorated.fqdn, key=key),
                kind=kind,
                value=value,
                position=position,
            )
        )

    for level, segment in enumerate(decorated.path_segments):
        add(path_key(level), DecorationKind.PATH, segment.value, level)

    position = 0
    for param in decorated.query_params:
        if param.is_empty:
            continue

        add(query_key(param.key), DecorationKind.QUERY, param.value, position)
        position += 1

    if decorated.fragment_params is not None:
        for position, param in enumerate(decorated.fragment_params):
            add(fragment_key(param.key), DecorationKind.FRAGMENT, param.value, position)
    elif decorated.fragment is not None and decorated.fragment.raw:
        add(fragment_key(), DecorationKind.FRAGMENT, decorated.fragment.value, 0)

    return decorations


def decorations_of(url: str, site: str) -> List[LinkDecoration]:
    return name_decorations(decompose(url, site), site)


__all__ = [
    "decompose",
    "reassemble",
    "name_decorations",
    "decorations_of",
]
