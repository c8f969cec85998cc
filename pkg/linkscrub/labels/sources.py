import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List, Optional

from pydantic import validator

from linkscrub.core.exceptions import ParsingError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.labels.models import TRACKING_PURPOSES, Purpose
from linkscrub.urls.models import DecorationId
from linkscrub.urls.rules import ANY, pattern_matches

logger = logging.getLogger(__name__)

COOKIE_PURPOSE_COLUMNS = ["domain", "key", "purpose"]
SCOPED_KEY_PREFIXES = ("path|", "fragment|")

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


class CookiePurpose(FrozenModel):
    domain: str = ""
    key: str
    purpose: Purpose

    @property
    def is_scoped(self) -> bool:
        return self.domain not in ("", ANY)

    def applies_to(self, site: str) -> bool:
        return not self.is_scoped or site == self.domain or site.endswith(f".{self.domain}")


class CookiePurposeDb(BaseModel):
    entries: List[CookiePurpose] = []

    def __len__(self):
        return len(self.entries)

    def purpose_of(self, site: str, key: str) -> Optional[Purpose]:
        """Domain scoped entries win over entries for any site"""
        candidates = [entry for entry in self.entries if entry.key == key and entry.applies_to(site)]
        candidates.sort(key=lambda entry: not entry.is_scoped)
        return candidates[0].purpose if candidates else None

    def is_tracking(self, site: str, key: str) -> bool:
        return self.purpose_of(site, key) in TRACKING_PURPOSES


def parse_cookie_purposes(text: str) -> CookiePurposeDb:
    entries = []

    for line_number, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].startswith("#"):
            continue
        elif line_number == 1 and [cell.strip() for cell in row] == COOKIE_PURPOSE_COLUMNS:
            continue
        elif len(row) != 3:
            raise ParsingError(f"cookie purposes line {line_number}: expected domain,key,purpose")

        domain, key, purpose = (cell.strip() for cell in row)
        try:
            entries.append(CookiePurpose(domain=domain, key=key, purpose=Purpose(purpose)))
        except ValueError as exc:
            raise ParsingError(f"cookie purposes line {line_number}: unknown purpose {purpose!r}") from exc

    return CookiePurposeDb(entries=entries)


@file_errors.decorate
def read_cookie_purposes(path: Path | str) -> CookiePurposeDb:
    return parse_cookie_purposes(Path(path).read_text(encoding="utf-8"))


class CuratedEntry(FrozenModel):
    fqdn: str = ANY
    key: str

    @validator("key")
    def key_not_empty(cls, key: str) -> str:
        if not key:
            raise ValueError("curated entry needs a key")

        return key

    def matches(self, decoration_id: DecorationId) -> bool:
        return self.key == decoration_id.key and pattern_matches(self.fqdn, decoration_id.fqdn)

    def render(self) -> str:
        return f"{self.fqdn}|{self.key}"


class CuratedList(BaseModel):
    entries: List[CuratedEntry] = []

    def __len__(self):
        return len(self.entries)

    def matches(self, decoration_id: DecorationId) -> bool:
        return any(entry.matches(decoration_id) for entry in self.entries)

    def dumps(self) -> str:
        return "".join(f"{entry.render()}\n" for entry in self.entries)


def parse_curated_entry(line: str) -> CuratedEntry:
    """`fqdn|key`, a bare key means any fqdn. `path|1` alone is a key, not an fqdn named `path`."""
    if "|" not in line or line.startswith(SCOPED_KEY_PREFIXES):
        return CuratedEntry(key=line)

    fqdn, _, key = line.partition("|")
    return CuratedEntry(fqdn=fqdn or ANY, key=key)


def parse_curated_list(lines: Iterable[str] | str) -> CuratedList:
    if isinstance(lines, str):
        lines = lines.splitlines()

    entries = []
    for line_number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith(("!", "#")):
            continue

        try:
            entries.append(parse_curated_entry(line))
        except ValueError as exc:
            raise ParsingError(f"curated list line {line_number}: {exc}") from exc

    return CuratedList(entries=entries)


@file_errors.decorate
def read_curated_list(path: Path | str) -> CuratedList:
    return parse_curated_list(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "CookiePurpose",
    "CookiePurposeDb",
    "parse_cookie_purposes",
    "read_cookie_purposes",
    "CuratedEntry",
    "CuratedList",
    "parse_curated_entry",
    "parse_curated_list",
    "read_curated_list",
]
