"""Follow governance redirects (pointer files) to the document they defer to.

Resolution follows the first redirect reference of each pointer file through
local paths and http(s) URLs, stops at the first non-pointer target, and
reports broken or cyclic chains instead of raising.
"""
from __future__ import annotations

import errno
import os
from dataclasses import dataclass
from enum import Enum
from typing import Protocol
from urllib.parse import urljoin, urlsplit

import requests

from .document import (
    DEFAULT_GOVERNANCE_FILENAMES,
    GovernanceDocument,
    RedirectRef,
    is_pointer_file,
    parse,
)

DEFAULT_DEPTH_CAP = 8
HTTP_TIMEOUT_SECONDS = 10.0
SIZE_CAP_BYTES = 1 << 20   # 1 MiB
MAX_HTTP_REDIRECTS = 5


class ResolutionStatus(Enum):
    NONE = "none"
    RESOLVED = "resolved"
    BROKEN = "broken"
    CYCLIC = "cyclic"


class FetchErrorKind(Enum):
    NOT_FOUND = "not-found"
    TIMEOUT = "timeout"
    TRANSPORT_ERROR = "transport-error"
    TOO_LARGE = "too-large"


class FetchError(Exception):
    def __init__(self, kind: FetchErrorKind, detail: str, is_cycle: bool = False):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail
        # Symlink loops surface as cycles, not broken targets.
        self.is_cycle = is_cycle


class TargetFetcher(Protocol):
    def fetch(self, target: str, base: str) -> str: ...


def _is_url(locator: str) -> bool:
    return urlsplit(locator).scheme in ("http", "https")


def canonical_locator(target: str, base: str) -> str:
    """Stable identity of a redirect target for cycle detection."""
    if _is_url(target):
        return target
    if _is_url(base):
        return urljoin(base, target)
    joined = os.path.join(os.path.dirname(base), target)
    return os.path.realpath(joined)


def canonical_self(locator: str) -> str:
    if _is_url(locator):
        return locator
    return os.path.realpath(locator)


class LocalHttpFetcher:
    """Reads relative paths from disk and absolute http(s) URLs off the network."""

    def __init__(
        self,
        timeout: float = HTTP_TIMEOUT_SECONDS,
        size_cap: int = SIZE_CAP_BYTES,
        max_redirects: int = MAX_HTTP_REDIRECTS,
    ):
        self.timeout = timeout
        self.size_cap = size_cap
        self.max_redirects = max_redirects

    def fetch(self, target: str, base: str) -> str:
        if _is_url(target) or _is_url(base):
            return self._fetch_url(target if _is_url(target) else urljoin(base, target))
        return self._fetch_file(os.path.join(os.path.dirname(base), target))

    def _fetch_file(self, path: str) -> str:
        try:
            if os.path.getsize(path) > self.size_cap:
                raise FetchError(FetchErrorKind.TOO_LARGE,
                                 f"{path} exceeds {self.size_cap} bytes")
            with open(path, "rb") as fh:
                data = fh.read(self.size_cap + 1)
        except FileNotFoundError:
            raise FetchError(FetchErrorKind.NOT_FOUND, f"not found: {path}") from None
        except OSError as exc:
            if exc.errno == errno.ELOOP:
                raise FetchError(FetchErrorKind.TRANSPORT_ERROR,
                                 f"symlink loop: {path}", is_cycle=True) from None
            raise FetchError(FetchErrorKind.TRANSPORT_ERROR, str(exc)) from None
        if len(data) > self.size_cap:
            raise FetchError(FetchErrorKind.TOO_LARGE,
                             f"{path} exceeds {self.size_cap} bytes")
        return data.decode("utf-8", errors="replace")

    def _session_get(self, url: str):
        session = requests.Session()
        session.max_redirects = self.max_redirects
        return session.get(url, timeout=self.timeout, stream=True)

    def _fetch_url(self, url: str) -> str:
        try:
            response = self._session_get(url)
        except requests.Timeout:
            raise FetchError(FetchErrorKind.TIMEOUT, f"timeout after {self.timeout}s") from None
        except requests.TooManyRedirects:
            raise FetchError(FetchErrorKind.TRANSPORT_ERROR,
                             f"more than {self.max_redirects} redirects") from None
        except requests.RequestException as exc:
            raise FetchError(FetchErrorKind.TRANSPORT_ERROR, str(exc)) from None
        with response:
            if response.status_code == 404:
                raise FetchError(FetchErrorKind.NOT_FOUND, "404")
            if response.status_code >= 400:
                raise FetchError(FetchErrorKind.TRANSPORT_ERROR,
                                 f"HTTP {response.status_code}")
            chunks: list[bytes] = []
            size = 0
            for chunk in response.iter_content(chunk_size=65536):
                size += len(chunk)
                if size > self.size_cap:
                    raise FetchError(FetchErrorKind.TOO_LARGE,
                                     f"{url} exceeds {self.size_cap} bytes")
                chunks.append(chunk)
        return b"".join(chunks).decode("utf-8", errors="replace")


class MappingFetcher:
    """In-memory fetcher for hermetic tests: canonical locator -> text.

    `errors` maps locators to the FetchError the fetch should raise instead.
    """

    def __init__(self, mapping: dict[str, str], errors: dict[str, FetchError] | None = None):
        self.mapping = dict(mapping)
        self.errors = dict(errors or {})

    def fetch(self, target: str, base: str) -> str:
        locator = canonical_locator(target, base)
        if locator in self.errors:
            raise self.errors[locator]
        if locator not in self.mapping:
            raise FetchError(FetchErrorKind.NOT_FOUND, f"not found: {locator}")
        return self.mapping[locator]


@dataclass(frozen=True)
class ChainStep:
    source: str
    ref: RedirectRef
    unfollowed: tuple[RedirectRef, ...] = ()


@dataclass(frozen=True)
class RedirectResolution:
    chain: tuple[ChainStep, ...]
    status: ResolutionStatus
    resolved_document: GovernanceDocument | None = None
    failure_detail: str | None = None


_NO_REDIRECT = RedirectResolution(chain=(), status=ResolutionStatus.NONE)


def resolve(
    doc: GovernanceDocument,
    fetcher: TargetFetcher,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    pointer_line_limit: int = 10,
    governance_filenames: frozenset[str] = DEFAULT_GOVERNANCE_FILENAMES,
) -> RedirectResolution:
    """Follow the first redirect of a pointer file until substance or failure.

    Non-pointer input returns status NONE with an empty chain. Termination is
    bounded by depth_cap; revisiting a locator (or exhausting the cap while
    still pointing) reports CYCLIC, a failed fetch reports BROKEN.
    """
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    if not is_pointer_file(doc, pointer_line_limit):
        return _NO_REDIRECT

    chain: list[ChainStep] = []
    visited = {canonical_self(doc.source_path)}
    current = doc
    for _ in range(depth_cap):
        ref = current.redirect_refs[0]
        chain.append(ChainStep(current.source_path, ref, current.redirect_refs[1:]))
        locator = canonical_locator(ref.target, current.source_path)
        if locator in visited:
            return RedirectResolution(tuple(chain), ResolutionStatus.CYCLIC,
                                      failure_detail=f"cycle at {ref.target}")
        visited.add(locator)
        try:
            text = fetcher.fetch(ref.target, current.source_path)
        except FetchError as exc:
            if exc.is_cycle:
                return RedirectResolution(tuple(chain), ResolutionStatus.CYCLIC,
                                          failure_detail=exc.detail)
            return RedirectResolution(tuple(chain), ResolutionStatus.BROKEN,
                                      failure_detail=exc.detail)
        next_doc = parse(text, source_path=locator,
                         governance_filenames=governance_filenames)
        if not is_pointer_file(next_doc, pointer_line_limit):
            return RedirectResolution(tuple(chain), ResolutionStatus.RESOLVED,
                                      resolved_document=next_doc)
        current = next_doc
    return RedirectResolution(tuple(chain), ResolutionStatus.CYCLIC,
                              failure_detail=f"depth cap {depth_cap} exhausted")
