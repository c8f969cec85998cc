import ipaddress
import logging
from functools import lru_cache
from typing import Optional

from publicsuffix2 import PublicSuffixList

from linkscrub.core.exceptions import ParsingError
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.urls.parsing import decompose

logger = logging.getLogger(__name__)

list_errors = ErrorWrapper(error_mappings={OSError: ParsingError, UnicodeDecodeError: ParsingError})


@lru_cache(maxsize=4)
@list_errors.decorate
def suffix_list(psl_file: Optional[str] = None) -> PublicSuffixList:
    """
    The public suffix list shipped with publicsuffix2, ICANN and private sections both,
    or the list stored at `psl_file`.
    """
    if psl_file is None:
        logger.debug("Loading the public suffix list bundled with publicsuffix2")
        return PublicSuffixList()

    logger.debug("Loading the public suffix list from %s", psl_file)
    with open(psl_file, encoding="utf-8") as file:
        return PublicSuffixList(psl_file=file)


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
    except ValueError:
        return False

    return True


def registrable_domain(host: str, psl_file: Optional[str] = None) -> str:
    """The public-suffix-plus-one domain of a host. Unknown suffixes use the implicit `*` rule."""
    host = host.lower().rstrip(".")

    if not host or _is_ip(host) or "." not in host:
        return host

    return suffix_list(psl_file).get_sld(host, wildcard=True, strict=False) or host


def site_of(url: str) -> str:
    return registrable_domain(decompose(url).fqdn)


__all__ = [
    "registrable_domain",
    "site_of",
    "suffix_list",
]
