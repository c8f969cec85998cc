import logging
import re
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from linkscrub.core.exceptions import RuleSyntaxError
from linkscrub.core.models import FrozenModel
from linkscrub.forest.forest import ScoredDecoration
from linkscrub.labels.models import Label
from linkscrub.urls.models import DecorationKind, query_key, unescape_query_key
from linkscrub.urls.rules import ANY, FilterList, FilterRule, SanitizeMode

logger = logging.getLogger(__name__)

REMOVEPARAM = "$removeparam="
SIDECAR_PREFIX = "!#linkscrub "
SIDECAR_HEADER = "! linkscrub sidecar: rules the removeparam dialect cannot express"
UNSAFE_KEY_RE = re.compile(r"[,$\s]")


def emit_filter_list(
    predictions: Iterable[ScoredDecoration],
    threshold: float,
    action: SanitizeMode | str = SanitizeMode.REPLACE,
    model_version: str = "",
) -> FilterList:
    """
    One rule per flagged DecorationId, scored by the mean of its instance scores.
    A (fqdn, key) flagged on every site it was seen on, with two sites or more, collapses into one `*` rule.
    """
    action = SanitizeMode(action)
    observed_sites: Dict[Tuple[str, str], set] = defaultdict(set)
    flagged_scores: Dict[Tuple[str, str], Dict[str, List[float]]] = defaultdict(lambda: defaultdict(list))

    for item in predictions:
        observed_sites[(item.id.fqdn, item.id.key)].add(item.id.site)

        if item.label == Label.ATS and item.score >= threshold:
            flagged_scores[(item.id.fqdn, item.id.key)][item.id.site].append(item.score)

    rules = []
    for (fqdn, key), per_site in flagged_scores.items():
        site_scores = {site: float(np.mean(scores)) for site, scores in per_site.items()}

        if len(site_scores) >= 2 and set(site_scores) == observed_sites[(fqdn, key)]:
            score = float(np.mean([site_scores[site] for site in sorted(site_scores)]))
            rules.append(
                FilterRule(scope=ANY, fqdn=fqdn, key=key, action=action, score=score, model_version=model_version)
            )
            continue

        rules.extend(
            FilterRule(scope=site, fqdn=fqdn, key=key, action=action, score=score, model_version=model_version)
            for site, score in site_scores.items()
        )

    filter_list = FilterList(rules=rules).sorted()
    logger.info("Emitted %d filter rules", len(filter_list))
    return filter_list


class AdblockExport(FrozenModel):
    text: str
    warnings: Tuple[str, ...] = ()


def _removeparam_line(rule: FilterRule) -> Optional[str]:
    key = unescape_query_key(rule.key)

    if (
        rule.kind != DecorationKind.QUERY
        or rule.scope != ANY
        or rule.action != SanitizeMode.STRIP
        or rule.fqdn.startswith("*.")
        or UNSAFE_KEY_RE.search(key)
    ):
        return None

    return f"{REMOVEPARAM}{key}" if rule.fqdn == ANY else f"{REMOVEPARAM}{key},domain={rule.fqdn}"


def export_adblock(filter_list: FilterList) -> AdblockExport:
    """
    Unscoped STRIP rules on query keys, for any host or one exact host, become removeparam lines.
    Every other rule goes to a sidecar section of comments with one warning each.
    """
    lines, sidecar, warnings = [], [], []

    for rule in filter_list:
        line = _removeparam_line(rule)

        if line is not None:
            if line not in lines:
                lines.append(line)
            continue

        sidecar.append(f"{SIDECAR_PREFIX}{rule.scope}\t{rule.fqdn}\t{rule.key}\t{rule.action.value}")
        message = (
            f"{rule.scope} {rule.fqdn}|{rule.key} ({rule.action.value}) cannot be expressed as removeparam, "
            f"written to the sidecar section"
        )
        logger.warning(message)
        warnings.append(message)

    if sidecar:
        lines.extend([SIDECAR_HEADER, *sidecar])

    return AdblockExport(text="".join(f"{line}\n" for line in lines), warnings=tuple(warnings))


def _parse_removeparam(line: str) -> FilterRule:
    if not line.startswith(REMOVEPARAM):
        raise RuleSyntaxError("removeparam rules with a URL pattern are not supported", line)

    options = line[line.index(REMOVEPARAM) + 1 :].split(",")
    key = options[0].partition("=")[2]
    fqdn = ANY

    for option in options[1:]:
        name, _, value = option.partition("=")
        if name != "domain" or not value or "|" in value or value.startswith(("~", "*")):
            raise RuleSyntaxError(f"unsupported removeparam option {option!r}", line)

        fqdn = value

    if not key:
        raise RuleSyntaxError("removeparam without a key", line)

    return FilterRule(scope=ANY, fqdn=fqdn, key=query_key(key), action=SanitizeMode.STRIP)


def parse_adblock(text: str) -> FilterList:
    """Reads removeparam lines and the sidecar section back into native rules"""
    rules = []

    for raw_line in text.splitlines():
        line = raw_line.strip()

        if raw_line.startswith(SIDECAR_PREFIX):
            fields = raw_line[len(SIDECAR_PREFIX) :].split("\t")
            if len(fields) != 4:
                raise RuleSyntaxError("sidecar entry needs scope, fqdn, key and action", raw_line)

            scope, fqdn, key, action = fields
            try:
                rules.append(FilterRule(scope=scope, fqdn=fqdn, key=key, action=SanitizeMode(action)))
            except ValueError as exc:
                raise RuleSyntaxError(str(exc), raw_line) from exc
        elif REMOVEPARAM in line and not line.startswith("!"):
            rules.append(_parse_removeparam(line))
        elif line and not line.startswith(("!", "[")):
            logger.debug("Skipping adblock rule %r", line)

    return FilterList(rules=rules)


__all__ = [
    "emit_filter_list",
    "AdblockExport",
    "export_adblock",
    "parse_adblock",
]
