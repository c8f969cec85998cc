import json
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import List

from pydantic import validator

from linkscrub.core.exceptions import ParsingError
from linkscrub.core.models import FrozenModel
from linkscrub.core.patterns import ErrorWrapper

KEYWORDS_ASSET = "keywords.json"
ANYWHERE_MIN_LEN = 5
TOKEN_SPLIT_RE = re.compile(r"[^a-z0-9]+")

asset_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


def url_tokens(url: str) -> List[str]:
    return [token for token in TOKEN_SPLIT_RE.split(url.lower()) if token]


def keyword_matches(keyword: str, url: str) -> bool:
    """
    A keyword matches a URL token that equals it or starts with it.
    Keywords of five or more characters match anywhere in the URL.
    """
    keyword = keyword.lower()

    if len(keyword) >= ANYWHERE_MIN_LEN and keyword in url.lower():
        return True

    return any(token == keyword or token.startswith(keyword) for token in url_tokens(url))


class KeywordLists(FrozenModel):
    ad: List[str]
    fingerprint: List[str]

    @validator("ad", "fingerprint", each_item=True)
    def keyword_not_blank(cls, keyword: str) -> str:
        keyword = keyword.strip().lower()
        if not keyword:
            raise ValueError("keywords must not be blank")

        return keyword

    def is_ad(self, url: str) -> bool:
        return any(keyword_matches(keyword, url) for keyword in self.ad)

    def is_fingerprint(self, url: str) -> bool:
        return any(keyword_matches(keyword, url) for keyword in self.fingerprint)

    @classmethod
    @asset_errors.decorate
    def load(cls, path: Path | str) -> "KeywordLists":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
@asset_errors.decorate
def default_keywords() -> KeywordLists:
    text = resources.files("linkscrub.assets").joinpath(KEYWORDS_ASSET).read_text(encoding="utf-8")
    return KeywordLists(**json.loads(text))


__all__ = [
    "KeywordLists",
    "default_keywords",
    "keyword_matches",
    "url_tokens",
]
