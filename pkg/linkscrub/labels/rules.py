import logging
import re
from pathlib import Path
from typing import Iterable, List, Optional

from adblockparser import AdblockParsingError, AdblockRules
from pydantic import PrivateAttr

from linkscrub.core.exceptions import ParsingError, RuleSyntaxError
from linkscrub.core.models import FrozenModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.labels.models import Label

logger = logging.getLogger(__name__)

# `/ads/` stays a substring rule, `/ad[0-9]+/` would need a regex engine
REGEX_HINT_RE = re.compile(r"[\\()\[\]{}+?]")

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})
engine_errors = ErrorWrapper(
    error_mappings={
        AdblockParsingError: lambda exc: RuleSyntaxError(f"adblockparser refused the rules ({exc})"),
        re.error: lambda exc: RuleSyntaxError(f"adblockparser built a bad pattern ({exc})"),
    },
)


@engine_errors.decorate
def _build_engine(filter_texts: List[str]) -> AdblockRules:
    return AdblockRules(filter_texts)


class RequestRule(FrozenModel):
    """One request rule in the filter list dialect, without options"""

    text: str
    exception: bool = False
    _engine: Optional[AdblockRules] = PrivateAttr(default=None)

    @property
    def pattern_text(self) -> str:
        body = self.text[2:] if self.exception else self.text

        # adblockparser reads `/.../` as a regex, a trailing `*` keeps it a plain path
        return f"{body}*" if body.startswith("/") and body.endswith("/") else body

    @property
    def filter_text(self) -> str:
        return f"@@{self.pattern_text}" if self.exception else self.pattern_text

    def matches(self, url: str) -> bool:
        """Whether the pattern matches the URL, ignoring the exception marker"""
        if self._engine is None:
            self._engine = _build_engine([self.pattern_text])

        return self._engine.should_block(url)


def compile_rule(text: str) -> RequestRule:
    rule = text.strip()
    exception = rule.startswith("@@")
    body = rule[2:] if exception else rule

    if not body:
        raise RuleSyntaxError("empty rule", text)
    elif "##" in body or "#@#" in body or "#?#" in body:
        raise RuleSyntaxError("element hiding rules are not supported", text)
    elif "$" in body:
        raise RuleSyntaxError("rule options are not supported", text)
    elif len(body) > 2 and body.startswith("/") and body.endswith("/") and REGEX_HINT_RE.search(body):
        raise RuleSyntaxError("regular expression rules are not supported", text)

    if body.endswith("|") and not body.endswith("||"):
        body = body[:-1]

    if body.startswith("||"):
        body = body[2:]
        if not re.split(r"[\^/*|]", body, maxsplit=1)[0]:
            raise RuleSyntaxError("host anchor without a host", text)
    elif body.startswith("|"):
        body = body[1:]

    if not body:
        raise RuleSyntaxError("rule has no pattern", text)

    return RequestRule(text=rule, exception=exception)


class RequestFilter(FrozenModel):
    """Request rules matched by adblockparser, exceptions win over blocking rules"""

    rules: List[RequestRule] = []
    _engine: Optional[AdblockRules] = PrivateAttr(default=None)

    def __len__(self):
        return len(self.rules)

    @property
    def blocking(self) -> List[RequestRule]:
        return [rule for rule in self.rules if not rule.exception]

    @property
    def exceptions(self) -> List[RequestRule]:
        return [rule for rule in self.rules if rule.exception]

    @property
    def engine(self) -> AdblockRules:
        if self._engine is None:
            self._engine = _build_engine([rule.filter_text for rule in self.rules])

        return self._engine

    def matches(self, url: str) -> bool:
        return bool(self.rules) and self.engine.should_block(url)


def parse_request_rules(lines: Iterable[str] | str) -> RequestFilter:
    if isinstance(lines, str):
        lines = lines.splitlines()

    rules = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("!") or line.startswith("[Adblock"):
            continue

        rules.append(compile_rule(line))

    logger.debug("Loaded %d request rules", len(rules))
    return RequestFilter(rules=rules)


@file_errors.decorate
def read_request_rules(path: Path | str) -> RequestFilter:
    return parse_request_rules(Path(path).read_text(encoding="utf-8"))


def match_request_filter(url: str, rules: RequestFilter) -> Label:
    return Label.ATS if rules.matches(url) else Label.NON_ATS


__all__ = [
    "RequestRule",
    "RequestFilter",
    "compile_rule",
    "parse_request_rules",
    "read_request_rules",
    "match_request_filter",
]
