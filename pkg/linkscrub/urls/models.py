import re
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import validator

from linkscrub.core.models import BaseModel, FrozenModel


PATH_KEY_RE = re.compile(r"^path\|(\d+)$")
FRAGMENT_KEY = "fragment"
FRAGMENT_KEY_PREFIX = "fragment|"
QUERY_KEY_PREFIX = "query|"


class DecorationKind(str, Enum):
    PATH = "path"
    QUERY = "query"
    FRAGMENT = "fragment"


def path_key(level: int) -> str:
    return f"path|{level}"


def fragment_key(key: Optional[str] = None) -> str:
    return FRAGMENT_KEY if key is None else f"{FRAGMENT_KEY_PREFIX}{key}"


def query_key(key: str) -> str:
    """Query keys shaped like a path or fragment key are escaped so the key keeps naming its kind."""
    if key.startswith(QUERY_KEY_PREFIX) or kind_of_key(key) != DecorationKind.QUERY:
        return f"{QUERY_KEY_PREFIX}{key}"

    return key


def unescape_query_key(key: str) -> str:
    return key[len(QUERY_KEY_PREFIX) :] if key.startswith(QUERY_KEY_PREFIX) else key


def kind_of_key(key: str) -> DecorationKind:
    """The naming scheme fully determines the kind of a decoration from its key."""
    if key.startswith(QUERY_KEY_PREFIX):
        return DecorationKind.QUERY
    elif PATH_KEY_RE.match(key):
        return DecorationKind.PATH
    elif key == FRAGMENT_KEY or key.startswith(FRAGMENT_KEY_PREFIX):
        return DecorationKind.FRAGMENT

    return DecorationKind.QUERY


def path_level(key: str) -> Optional[int]:
    match = PATH_KEY_RE.match(key)
    return int(match.group(1)) if match else None


class UrlToken(FrozenModel):
    """A single URL component: the percent-decoded value and the text exactly as it appeared."""

    value: str
    raw: str

    @classmethod
    def plain(cls, value: str) -> "UrlToken":
        return cls(value=value, raw=value)


class KeyValue(FrozenModel):
    key: str
    value: str
    raw_key: str
    raw_value: str
    has_equals: bool = True

    @property
    def is_empty(self) -> bool:
        """`a=1&&b=2` produces an empty token between the separators"""
        return not self.raw_key and not self.has_equals

    def render(self) -> str:
        return f"{self.raw_key}={self.raw_value}" if self.has_equals else self.raw_key


class DecoratedUrl(BaseModel):
    raw: str
    scheme: str
    raw_scheme: str
    netloc: str
    fqdn: str
    leading_slash: bool = False
    path_segments: List[UrlToken] = []
    resource_name: UrlToken = UrlToken(value="", raw="")
    has_query: bool = False
    query_params: List[KeyValue] = []
    has_fragment: bool = False
    fragment: Optional[UrlToken] = None
    fragment_params: Optional[List[KeyValue]] = None

    @property
    def path_values(self) -> List[str]:
        return [segment.value for segment in self.path_segments]

    @property
    def query_pairs(self) -> List[Tuple[str, str]]:
        return [(param.key, param.value) for param in self.query_params if not param.is_empty]

    @property
    def fragment_value(self) -> Optional[str | List[Tuple[str, str]]]:
        if self.fragment_params is not None:
            return [(param.key, param.value) for param in self.fragment_params]
        elif self.fragment is not None:
            return self.fragment.value

        return None

    @property
    def depth(self) -> int:
        return len(self.path_segments)


class DecorationId(FrozenModel):
    site: str
    fqdn: str
    key: str

    @property
    def kind(self) -> DecorationKind:
        return kind_of_key(self.key)

    @property
    def sort_key(self) -> Tuple[str, str, str]:
        return self.site, self.fqdn, self.key

    def __str__(self):
        return f"{self.fqdn}|{self.key}"

    def __lt__(self, other: "DecorationId") -> bool:
        return self.sort_key < other.sort_key


class LinkDecoration(FrozenModel):
    id: DecorationId
    kind: DecorationKind
    value: str
    position: int

    @validator("kind")
    def kind_matches_key(cls, kind, values):
        decoration_id = values.get("id")

        if decoration_id is not None and decoration_id.kind != kind:
            raise ValueError(f"key {decoration_id.key!r} does not name a {kind.value} decoration")

        return kind

    def __str__(self):
        return f"{self.id}:{self.value}"


__all__ = [
    "DecorationKind",
    "UrlToken",
    "KeyValue",
    "DecoratedUrl",
    "DecorationId",
    "LinkDecoration",
    "path_key",
    "fragment_key",
    "query_key",
    "unescape_query_key",
    "kind_of_key",
    "path_level",
    "FRAGMENT_KEY",
]
