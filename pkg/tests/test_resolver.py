from __future__ import annotations

import os

import pytest
import requests

from agentlint.document import parse
from agentlint.resolver import (
    FetchError,
    FetchErrorKind,
    LocalHttpFetcher,
    MappingFetcher,
    ResolutionStatus,
    canonical_locator,
    resolve,
)

GOVERNANCE = "\n".join(f"Real governance guidance, line {i}." for i in range(15))


def pointer_doc(target="CLAUDE.md", source="/repo/AGENTS.md"):
    return parse(f"See {target} for instructions.", source_path=source)


class TestCanonicalLocator:
    def test_relative_path(self):
        loc = canonical_locator("CLAUDE.md", "/repo/AGENTS.md")
        assert loc == os.path.realpath("/repo/CLAUDE.md")

    def test_parent_path(self):
        loc = canonical_locator("../CLAUDE.md", "/repo/sub/AGENTS.md")
        assert loc == os.path.realpath("/repo/CLAUDE.md")

    def test_url_target(self):
        loc = canonical_locator("https://example.com/AGENTS.md", "/repo/AGENTS.md")
        assert loc == "https://example.com/AGENTS.md"

    def test_relative_against_url_base(self):
        loc = canonical_locator("CLAUDE.md", "https://example.com/docs/AGENTS.md")
        assert loc == "https://example.com/docs/CLAUDE.md"


class TestResolveWithMappingFetcher:
    def test_non_pointer_returns_none_status(self):
        doc = parse(GOVERNANCE + "\nAlso see CLAUDE.md.", source_path="/repo/AGENTS.md")
        res = resolve(doc, MappingFetcher({}))
        assert res.status is ResolutionStatus.NONE
        assert res.chain == ()
        assert res.resolved_document is None

    def test_no_refs_returns_none_status(self):
        doc = parse("short file", source_path="/repo/AGENTS.md")
        assert resolve(doc, MappingFetcher({})).status is ResolutionStatus.NONE

    def test_resolved_single_hop(self):
        fetcher = MappingFetcher({"/repo/CLAUDE.md": GOVERNANCE})
        res = resolve(pointer_doc(), fetcher)
        assert res.status is ResolutionStatus.RESOLVED
        assert len(res.chain) == 1
        assert res.chain[0].ref.target == "CLAUDE.md"
        assert res.resolved_document is not None
        assert res.resolved_document.substantive_line_count == 15

    def test_resolved_two_hops(self):
        fetcher = MappingFetcher({
            "/repo/CLAUDE.md": "Read docs/real.md please.",
            "/repo/docs/real.md": GOVERNANCE,
        })
        res = resolve(pointer_doc(), fetcher)
        assert res.status is ResolutionStatus.RESOLVED
        assert len(res.chain) == 2

    def test_missing_target_is_broken(self):
        res = resolve(pointer_doc(), MappingFetcher({}))
        assert res.status is ResolutionStatus.BROKEN
        assert res.resolved_document is None
        assert res.failure_detail

    def test_http_404_detail(self):
        doc = pointer_doc(target="https://example.com/AGENTS.md")
        fetcher = MappingFetcher(
            {}, errors={"https://example.com/AGENTS.md":
                        FetchError(FetchErrorKind.NOT_FOUND, "404")}
        )
        res = resolve(doc, fetcher)
        assert res.status is ResolutionStatus.BROKEN
        assert res.failure_detail == "404"

    def test_two_file_cycle(self):
        fetcher = MappingFetcher({
            "/repo/CLAUDE.md": "See AGENT.md.",
            "/repo/AGENT.md": "See CLAUDE.md.",
        })
        res = resolve(pointer_doc(), fetcher)
        assert res.status is ResolutionStatus.CYCLIC
        assert "cycle" in res.failure_detail

    def test_self_reference_cycle(self):
        doc = parse("See AGENTS.md.", source_path="/repo/AGENTS.md")
        fetcher = MappingFetcher({"/repo/AGENTS.md": "See AGENTS.md."})
        res = resolve(doc, fetcher)
        assert res.status is ResolutionStatus.CYCLIC

    def test_depth_cap_exhaustion_is_cyclic(self):
        # an endless chain of distinct pointer files
        mapping = {f"/repo/f{i}.md": f"Read f{i+1}.md now." for i in range(40)}
        doc = parse("Read f0.md now.", source_path="/repo/AGENTS.md")
        res = resolve(doc, MappingFetcher(mapping), depth_cap=8)
        assert res.status is ResolutionStatus.CYCLIC
        assert len(res.chain) <= 8
        assert "depth cap" in res.failure_detail

    def test_depth_cap_must_be_positive(self):
        with pytest.raises(ValueError):
            resolve(pointer_doc(), MappingFetcher({}), depth_cap=0)

    def test_only_first_ref_followed(self):
        doc = parse("See CLAUDE.md or see GEMINI.md.", source_path="/repo/AGENTS.md")
        fetcher = MappingFetcher({
            "/repo/CLAUDE.md": GOVERNANCE,
            "/repo/GEMINI.md": "unused",
        })
        res = resolve(doc, fetcher)
        assert res.status is ResolutionStatus.RESOLVED
        assert res.chain[0].ref.target == "CLAUDE.md"
        assert len(res.chain[0].unfollowed) == 1
        assert res.chain[0].unfollowed[0].target == "GEMINI.md"

    def test_deterministic(self):
        fetcher = MappingFetcher({"/repo/CLAUDE.md": GOVERNANCE})
        a = resolve(pointer_doc(), fetcher)
        b = resolve(pointer_doc(), fetcher)
        assert a == b


class TestFilesystemFetcher:
    def test_reads_sibling_file(self, tmp_path):
        (tmp_path / "CLAUDE.md").write_text(GOVERNANCE, encoding="utf-8")
        source = tmp_path / "AGENTS.md"
        source.write_text("See CLAUDE.md.", encoding="utf-8")
        doc = parse(source.read_text(encoding="utf-8"), source_path=str(source))
        res = resolve(doc, LocalHttpFetcher())
        assert res.status is ResolutionStatus.RESOLVED
        assert res.resolved_document.source_path.endswith("CLAUDE.md")

    def test_missing_target_not_found(self, tmp_path):
        source = tmp_path / "AGENTS.md"
        source.write_text("See CLAUDE.md.", encoding="utf-8")
        doc = parse(source.read_text(encoding="utf-8"), source_path=str(source))
        res = resolve(doc, LocalHttpFetcher())
        assert res.status is ResolutionStatus.BROKEN
        assert "not found" in res.failure_detail

    def test_subdirectory_target(self, tmp_path):
        (tmp_path / "docs").mkdir()
        (tmp_path / "docs" / "guide.md").write_text(GOVERNANCE, encoding="utf-8")
        source = tmp_path / "AGENTS.md"
        source.write_text("Refer to docs/guide.md for details.", encoding="utf-8")
        doc = parse(source.read_text(encoding="utf-8"), source_path=str(source))
        res = resolve(doc, LocalHttpFetcher())
        assert res.status is ResolutionStatus.RESOLVED

    def test_symlinked_target_resolves_transparently(self, tmp_path):
        real = tmp_path / "real.md"
        real.write_text(GOVERNANCE, encoding="utf-8")
        (tmp_path / "CLAUDE.md").symlink_to(real)
        source = tmp_path / "AGENTS.md"
        source.write_text("See CLAUDE.md.", encoding="utf-8")
        doc = parse(source.read_text(encoding="utf-8"), source_path=str(source))
        res = resolve(doc, LocalHttpFetcher())
        assert res.status is ResolutionStatus.RESOLVED

    def test_self_symlink_is_cyclic(self, tmp_path):
        loop = tmp_path / "CLAUDE.md"
        loop.symlink_to(loop)
        source = tmp_path / "AGENTS.md"
        source.write_text("See CLAUDE.md.", encoding="utf-8")
        doc = parse(source.read_text(encoding="utf-8"), source_path=str(source))
        res = resolve(doc, LocalHttpFetcher())
        assert res.status is ResolutionStatus.CYCLIC

    def test_oversized_target_too_large(self, tmp_path):
        big = tmp_path / "CLAUDE.md"
        big.write_text("x" * (1 << 20 + 1), encoding="utf-8")
        source = tmp_path / "AGENTS.md"
        source.write_text("See CLAUDE.md.", encoding="utf-8")
        doc = parse(source.read_text(encoding="utf-8"), source_path=str(source))
        res = resolve(doc, LocalHttpFetcher())
        assert res.status is ResolutionStatus.BROKEN
        assert "exceeds" in res.failure_detail


class _FakeResponse:
    def __init__(self, status_code=200, chunks=(b"",)):
        self.status_code = status_code
        self._chunks = chunks

    def iter_content(self, chunk_size, decode_unicode=False):
        return iter(self._chunks)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class TestHttpErrorMapping:
    def _fetch(self, monkeypatch, effect):
        fetcher = LocalHttpFetcher()
        monkeypatch.setattr(fetcher, "_session_get", effect)
        return fetcher

    def test_404_maps_to_not_found(self, monkeypatch):
        fetcher = self._fetch(monkeypatch, lambda url: _FakeResponse(status_code=404))
        with pytest.raises(FetchError) as info:
            fetcher.fetch("https://example.com/AGENTS.md", "/repo/AGENTS.md")
        assert info.value.kind is FetchErrorKind.NOT_FOUND
        assert info.value.detail == "404"

    def test_500_maps_to_transport_error(self, monkeypatch):
        fetcher = self._fetch(monkeypatch, lambda url: _FakeResponse(status_code=500))
        with pytest.raises(FetchError) as info:
            fetcher.fetch("https://example.com/AGENTS.md", "/repo/AGENTS.md")
        assert info.value.kind is FetchErrorKind.TRANSPORT_ERROR

    def test_timeout(self, monkeypatch):
        def boom(url):
            raise requests.Timeout("too slow")
        fetcher = self._fetch(monkeypatch, boom)
        with pytest.raises(FetchError) as info:
            fetcher.fetch("https://example.com/AGENTS.md", "/repo/AGENTS.md")
        assert info.value.kind is FetchErrorKind.TIMEOUT

    def test_connection_failure(self, monkeypatch):
        def boom(url):
            raise requests.ConnectionError("unreachable")
        fetcher = self._fetch(monkeypatch, boom)
        with pytest.raises(FetchError) as info:
            fetcher.fetch("https://example.com/AGENTS.md", "/repo/AGENTS.md")
        assert info.value.kind is FetchErrorKind.TRANSPORT_ERROR

    def test_streamed_size_cap(self, monkeypatch):
        big = _FakeResponse(chunks=(b"x" * 65536,) * 20)
        fetcher = self._fetch(monkeypatch, lambda url: big)
        with pytest.raises(FetchError) as info:
            fetcher.fetch("https://example.com/AGENTS.md", "/repo/AGENTS.md")
        assert info.value.kind is FetchErrorKind.TOO_LARGE
