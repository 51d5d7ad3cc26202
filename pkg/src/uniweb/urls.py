"""URL parsing, normalization and university-relative classification.

Normalization lowercases scheme and host, strips a leading "www.", drops
default ports, removes the query string and fragment (recording that the
URL was dynamic) and trims trailing slashes, so the normalized form is
stable under re-normalization.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from urllib.parse import urlsplit

from .errors import UrlParseError

DEFAULT_SCHEME = "http"

# Session-id style path segments that mark a URL as dynamic even without "?".
DEFAULT_DYNAMIC_PATH_PATTERNS = (
    r";jsessionid=",
    r"(?i)phpsessid",
    r"(?i)session[_-]?id=",
)

# Path endings treated as a single standalone page rather than a site.
DEFAULT_SINGLE_PAGE_EXTENSIONS = ("html", "htm", "xml", "shtml")

_HOST_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?(\.[a-z0-9]([a-z0-9-]*[a-z0-9])?)+$")
_SCHEME_RE = re.compile(r"^[a-zA-Z][a-zA-Z0-9+.-]*://")

SUBDOMAIN = "subdomain"
SUBDIRECTORY = "subdirectory"
APEX = "apex"
EXTERNAL = "external"

STATUS_LIVE = "live"
STATUS_BROKEN = "broken_but_valid"


@dataclass(frozen=True)
class WebUrl:
    """A parsed URL with the fields the admission rules look at."""

    raw: str
    normalized: str
    host: str
    path: str
    syntax_class: str = APEX
    dynamic: bool = False
    status: str = STATUS_LIVE
    redirect_target: str | None = None

    def with_status(self, status: str) -> "WebUrl":
        return replace(self, status=status)

    def with_redirect(self, target: str | None) -> "WebUrl":
        return replace(self, redirect_target=target)


@dataclass(frozen=True)
class UrlConfig:
    """Knobs for dynamic-URL detection and single-page exclusion."""

    dynamic_path_patterns: tuple[str, ...] = DEFAULT_DYNAMIC_PATH_PATTERNS
    single_page_extensions: tuple[str, ...] = DEFAULT_SINGLE_PAGE_EXTENSIONS
    default_scheme: str = DEFAULT_SCHEME

    def compiled_patterns(self) -> list[re.Pattern]:
        return [re.compile(p) for p in self.dynamic_path_patterns]


DEFAULT_URL_CONFIG = UrlConfig()


def parse_and_normalize_url(raw: str, config: UrlConfig = DEFAULT_URL_CONFIG) -> WebUrl:
    """Parse raw text into a normalized WebUrl.

    Scheme-less inputs get the configured default scheme. Raises
    UrlParseError when no valid host can be extracted.
    """
    if not raw or not raw.strip():
        raise UrlParseError("empty URL")
    text = raw.strip()
    if not _SCHEME_RE.match(text):
        text = f"{config.default_scheme}://{text}"
    parts = urlsplit(text)
    host = (parts.hostname or "").lower()
    if host.startswith("www.") and host.count(".") >= 2:
        host = host[4:]
    if not host or not _HOST_RE.match(host):
        raise UrlParseError(f"malformed URL (no host): {raw!r}")

    port = parts.port
    if port is not None and port not in (80, 443):
        host_part = f"{host}:{port}"
    else:
        host_part = host

    path = parts.path.rstrip("/")
    dynamic = bool(parts.query)
    if not dynamic:
        for pattern in config.compiled_patterns():
            if pattern.search(parts.path):
                dynamic = True
                break

    scheme = parts.scheme.lower()
    normalized = f"{scheme}://{host_part}{path}"
    syntax = SUBDIRECTORY if path else APEX
    return WebUrl(
        raw=raw,
        normalized=normalized,
        host=host_part,
        path=path,
        syntax_class=syntax,
        dynamic=dynamic,
    )


def classify_against_domains(url: WebUrl, domains: list[str] | set[str]) -> str:
    """Classify a URL relative to a set of registered domains.

    Total function: returns subdomain, subdirectory, apex or external.
    Exact host matches win over strict-label subdomain extensions.
    """
    host = url.host.split(":")[0]
    domain_set = {d.lower() for d in domains}
    if host in domain_set:
        return SUBDIRECTORY if url.path else APEX
    for domain in domain_set:
        if host.endswith("." + domain):
            return SUBDOMAIN
    return EXTERNAL


def is_single_page(url: WebUrl, config: UrlConfig = DEFAULT_URL_CONFIG) -> bool:
    """True when the path ends in a standalone-page file extension."""
    last = url.path.rsplit("/", 1)[-1]
    if "." not in last:
        return False
    ext = last.rsplit(".", 1)[-1].lower()
    return ext in config.single_page_extensions


def second_level_label(host: str) -> str:
    """Label left of the top-level domain ("ub" for both ub.es and ub.edu)."""
    labels = host.split(":")[0].split(".")
    return labels[-2] if len(labels) >= 2 else labels[0]
