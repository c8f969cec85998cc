import logging
from enum import Enum
from typing import Iterable, List, Optional, Tuple

from pydantic import confloat, validator

from linkscrub.core.constants import FILTER_LIST_VERSION
from linkscrub.core.exceptions import ParsingError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.urls.models import DecorationId, DecorationKind, kind_of_key, PATH_KEY_RE

logger = logging.getLogger(__name__)

ANY = "*"
FILTER_LIST_HEADER = f"! linkscrub filter list v{FILTER_LIST_VERSION}"


class SanitizeMode(str, Enum):
    REPLACE = "replace"
    STRIP = "strip"


def pattern_matches(pattern: str, value: str) -> bool:
    """`*` matches anything, `*.suffix` matches the suffix and its subdomains."""
    if pattern == ANY:
        return True
    elif pattern.startswith("*."):
        suffix = pattern[2:]
        return value == suffix or value.endswith(f".{suffix}")

    return pattern == value


class FilterRule(FrozenModel):
    scope: str = ANY
    fqdn: str
    key: str
    action: SanitizeMode = SanitizeMode.REPLACE
    score: confloat(ge=0.0, le=1.0) = 1.0
    model_version: str = ""

    @validator("key")
    def key_is_named(cls, key: str) -> str:
        if not key:
            raise ValueError("filter rule key must not be empty")
        elif key.startswith("path|") and not PATH_KEY_RE.match(key):
            raise ValueError(f"path key must look like path|<level>, got {key!r}")

        return key

    @property
    def kind(self) -> DecorationKind:
        return kind_of_key(self.key)

    @property
    def sort_key(self) -> Tuple[str, str, str]:
        return self.scope, self.fqdn, self.key

    def matches(self, decoration_id: DecorationId) -> bool:
        return (
            self.key == decoration_id.key
            and pattern_matches(self.scope, decoration_id.site)
            and pattern_matches(self.fqdn, decoration_id.fqdn)
        )

    def applies_to(self, site: str, fqdn: str) -> bool:
        return pattern_matches(self.scope, site) and pattern_matches(self.fqdn, fqdn)

    def render(self) -> str:
        return "\t".join(
            [self.scope, self.fqdn, self.key, self.action.value, repr(float(self.score)), self.model_version]
        )


class FilterList(BaseModel):
    rules: List[FilterRule] = []
    version: int = FILTER_LIST_VERSION

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def find(self, decoration_id: DecorationId) -> Optional[FilterRule]:
        for rule in self.rules:
            if rule.matches(decoration_id):
                return rule

        return None

    def rules_for(self, site: str, fqdn: str) -> List[FilterRule]:
        return [rule for rule in self.rules if rule.applies_to(site, fqdn)]

    def sorted(self) -> "FilterList":
        return FilterList(rules=sorted(self.rules, key=lambda rule: rule.sort_key), version=self.version)

    def dumps(self) -> str:
        return "\n".join([FILTER_LIST_HEADER, *(rule.render() for rule in self.rules)]) + "\n"


def parse_filter_list(lines: Iterable[str] | str) -> FilterList:
    if isinstance(lines, str):
        lines = lines.splitlines()

    rules = []
    for line_number, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("!"):
            continue

        fields = line.split("\t")
        if len(fields) != 6:
            raise ParsingError(f"line {line_number}: expected 6 tab-separated fields, got {len(fields)}")

        scope, fqdn, key, action, score, model_version = fields
        try:
            rules.append(
                FilterRule(
                    scope=scope,
                    fqdn=fqdn,
                    key=key,
                    action=SanitizeMode(action),
                    score=float(score),
                    model_version=model_version,
                )
            )
        except ValueError as exc:
            raise ParsingError(f"line {line_number}: {exc}") from exc

    logger.debug("Parsed %d filter rules", len(rules))
    return FilterList(rules=rules)


__all__ = [
    "ANY",
    "SanitizeMode",
    "FilterRule",
    "FilterList",
    "parse_filter_list",
    "pattern_matches",
    "FILTER_LIST_HEADER",
]
