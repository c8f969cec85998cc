import logging
import string
from typing import List, Optional

import numpy as np

from linkscrub.core.models import BaseModel
from linkscrub.urls.models import DecoratedUrl, DecorationKind, KeyValue, UrlToken, path_level
from linkscrub.urls.parsing import decompose, name_decorations, reassemble
from linkscrub.urls.rules import FilterList, FilterRule, SanitizeMode

logger = logging.getLogger(__name__)

TOKEN_ALPHABET = np.array(list(string.ascii_letters + string.digits))


class SanitizeResult(BaseModel):
    url: str
    replaced: List[str] = []
    stripped: List[str] = []
    audit: List[str] = []

    @property
    def changed(self) -> bool:
        return bool(self.replaced or self.stripped)


def random_token(rng: np.random.Generator, length: int) -> str:
    if length <= 0:
        return ""

    return "".join(rng.choice(TOKEN_ALPHABET, size=length))


def _audit_inapplicable(decorated: DecoratedUrl, rules: List[FilterRule], audit: List[str]):
    for rule in rules:
        level = path_level(rule.key)

        if level is not None and level >= decorated.depth:
            message = f"rule {rule.fqdn}|{rule.key} not applicable: {decorated.fqdn} path depth is {decorated.depth}"
            logger.info(message)
            audit.append(message)


def sanitize_with_audit(
    url: str,
    site: str,
    rules: FilterList,
    mode: Optional[SanitizeMode] = None,
    seed: int = 0,
) -> SanitizeResult:
    decorated = decompose(url, site)
    audit: List[str] = []
    candidate_rules = rules.rules_for(site, decorated.fqdn)

    if not candidate_rules:
        return SanitizeResult(url=url)

    _audit_inapplicable(decorated, candidate_rules, audit)

    rng = np.random.default_rng(seed)
    path_segments = list(decorated.path_segments)
    query_params: List[Optional[KeyValue]] = list(decorated.query_params)
    fragment = decorated.fragment
    fragment_params: Optional[List[Optional[KeyValue]]] = (
        list(decorated.fragment_params) if decorated.fragment_params is not None else None
    )
    replaced, stripped = [], []

    # query positions skip empty tokens, map them back to indexes in query_params
    query_indexes = [index for index, param in enumerate(decorated.query_params) if not param.is_empty]

    for decoration in name_decorations(decorated, site):
        rule = next((rule for rule in candidate_rules if rule.matches(decoration.id)), None)
        if rule is None:
            continue

        action = mode or rule.action
        if decoration.kind == DecorationKind.PATH:
            action = SanitizeMode.REPLACE  # path levels keep the URL shape

        if action == SanitizeMode.STRIP:
            if decoration.kind == DecorationKind.QUERY:
                query_params[query_indexes[decoration.position]] = None
            elif fragment_params is not None:
                fragment_params[decoration.position] = None
            else:
                fragment = None

            stripped.append(str(decoration.id))
            continue

        token = random_token(rng, len(decoration.value))
        if decoration.kind == DecorationKind.PATH:
            path_segments[decoration.position] = UrlToken.plain(token)
        elif decoration.kind == DecorationKind.QUERY:
            index = query_indexes[decoration.position]
            query_params[index] = query_params[index].copy(update={"value": token, "raw_value": token})
        elif fragment_params is not None:
            param = fragment_params[decoration.position]
            fragment_params[decoration.position] = param.copy(update={"value": token, "raw_value": token})
        else:
            fragment = UrlToken.plain(token)

        replaced.append(str(decoration.id))

    if not replaced and not stripped:
        return SanitizeResult(url=url, audit=audit)

    kept_query = [param for param in query_params if param is not None]
    kept_fragment = [param for param in fragment_params if param is not None] if fragment_params is not None else None
    has_fragment = decorated.has_fragment and (fragment is not None or bool(kept_fragment))

    sanitized = decorated.copy(
        update={
            "path_segments": path_segments,
            "query_params": kept_query,
            "has_query": decorated.has_query and (bool(kept_query) or len(decorated.query_params) == len(kept_query)),
            "fragment": fragment,
            "fragment_params": kept_fragment if kept_fragment else None,
            "has_fragment": has_fragment,
        }
    )
    return SanitizeResult(url=reassemble(sanitized), replaced=replaced, stripped=stripped, audit=audit)


def sanitize(
    url: str,
    site: str,
    rules: FilterList,
    mode: Optional[SanitizeMode] = None,
    seed: int = 0,
) -> str:
    return sanitize_with_audit(url, site, rules, mode=mode, seed=seed).url


__all__ = [
    "SanitizeResult",
    "sanitize",
    "sanitize_with_audit",
    "random_token",
]
