"""Structured model of an agent governance file (AGENTS.md and similar).

The model covers exactly what the detectors consume: lines with a
substantive/boilerplate classification, ATX-heading sections, fenced code
blocks, and references that redirect the reader to another governance
document. Full CommonMark (setext headings, tables, inline HTML rendering)
is deliberately out of scope.
"""
from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache


class Classification(Enum):
    """What a physical line contributes to the document."""

    SUBSTANTIVE = "substantive"
    BOILERPLATE = "boilerplate"
    BLANK = "blank"


class RedirectKind(Enum):
    LINK = "link"
    MENTION = "mention"
    SEE_DIRECTIVE = "see-directive"


# Well-known governance filenames; a bare mention of one of these counts as a
# redirect reference even without a "see ..." directive. Matched on the
# basename, case-insensitively.
DEFAULT_GOVERNANCE_FILENAMES = frozenset({
    "claude.md",
    "contributing.md",
    "copilot-instructions.md",
    "gemini.md",
    "agent.md",
    ".cursorrules",
})

# A line containing any of these (case-insensitive) is machine-written
# scaffolding, not authored guidance.
AUTO_GENERATION_MARKERS = ("generated by", "do not edit", "auto-generated")

_HEADING_RE = re.compile(r"^ {0,3}(#{1,6})(?:[ \t]+(.*?))?[ \t]*$")
_FENCE_RE = re.compile(r"^ {0,3}(`{3,}|~{3,})[ \t]*(.*)$")
_HRULE_RE = re.compile(r"^ {0,3}([-_*])(?: *\1){2,} *$")
_HTML_COMMENT_RE = re.compile(r"^\s*<!--.*-->\s*$")
_IMAGE = r"!\[[^\]]*\]\([^()\s]*\)"
_IMAGE_ONLY_RE = re.compile(rf"^\s*(?:(?:\[{_IMAGE}\]\([^()]*\)|{_IMAGE})\s*)+$")
_TRAILING_HASHES_RE = re.compile(r"[ \t]+#+[ \t]*$")

_LINK_RE = re.compile(r"\[([^\]\n]*)\]\(\s*<?([^()\s>]+)>?(?:\s+\"[^\"]*\")?\s*\)")
_DIRECTIVE_RE = re.compile(
    r"(?<!\w)(?:see|refer to|read)\b(?:\W+\w+){0,4}?[^\S\n]+"
    r"((?:https?://)?(?:[\w.\-]+[/\\])*(?:[\w.\-]+\.md|\.cursorrules))(?![\w\-])",
    re.IGNORECASE,
)
_PATH_TOKEN_RE = re.compile(r"(?:https?://)?[A-Za-z0-9_.\-/\\]+")


@dataclass(frozen=True)
class Span:
    """Half-open character range into a document's raw text."""

    start: int
    end: int


@dataclass(frozen=True)
class Line:
    index: int
    text: str
    terminator: str
    classification: Classification


@dataclass(frozen=True)
class Section:
    heading_text: str
    heading_level: int
    line_range: tuple[int, int]


@dataclass(frozen=True)
class CodeBlock:
    """A fenced block; line_range includes the fence delimiter lines."""

    line_range: tuple[int, int]
    info_string: str
    content: str


@dataclass(frozen=True)
class RedirectRef:
    target: str
    span: Span
    kind: RedirectKind


@dataclass(frozen=True)
class GovernanceDocument:
    source_path: str
    raw_text: str
    lines: tuple[Line, ...]
    sections: tuple[Section, ...]
    code_blocks: tuple[CodeBlock, ...]
    redirect_refs: tuple[RedirectRef, ...]
    substantive_line_count: int
    line_offsets: tuple[int, ...]

    def line_span(self, index: int) -> Span:
        line = self.lines[index]
        start = self.line_offsets[index]
        return Span(start, start + len(line.text))

    def line_of_offset(self, pos: int) -> int:
        """0-based index of the line containing character position pos."""
        return bisect_right(self.line_offsets, pos) - 1

    def slice(self, span: Span) -> str:
        return self.raw_text[span.start:span.end]


def _split_lines(text: str) -> list[tuple[str, str]]:
    """Split into (text, terminator) pairs; concatenation restores the input."""
    out: list[tuple[str, str]] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            out.append((text[start:i], "\n"))
            i += 1
            start = i
        elif ch == "\r":
            if i + 1 < n and text[i + 1] == "\n":
                out.append((text[start:i], "\r\n"))
                i += 2
            else:
                out.append((text[start:i], "\r"))
                i += 1
            start = i
        else:
            i += 1
    if start < n:
        out.append((text[start:], ""))
    return out


def classify_line(text: str, in_code_block: bool = False) -> Classification:
    """Classify one line. Fence delimiters themselves are handled by parse().

    Inside a fence every non-blank line is content and counts as substantive;
    outside, markup scaffolding (headings, rules, badges, comments, generation
    markers) is boilerplate and everything else is substantive.
    """
    if not text.strip():
        return Classification.BLANK
    if in_code_block:
        return Classification.SUBSTANTIVE
    lowered = text.lower()
    if any(marker in lowered for marker in AUTO_GENERATION_MARKERS):
        return Classification.BOILERPLATE
    if _IMAGE_ONLY_RE.match(text):
        return Classification.BOILERPLATE
    if _HRULE_RE.match(text):
        return Classification.BOILERPLATE
    if _HTML_COMMENT_RE.match(text):
        return Classification.BOILERPLATE
    if _HEADING_RE.match(text):
        return Classification.BOILERPLATE
    if _FENCE_RE.match(text):
        return Classification.BOILERPLATE
    return Classification.SUBSTANTIVE


@lru_cache(maxsize=8)
def _mention_names(governance_filenames: frozenset[str]) -> frozenset[str]:
    return frozenset(name.lower() for name in governance_filenames)


@lru_cache(maxsize=8)
def _redirect_needles(names: frozenset[str]) -> tuple[str, ...]:
    # Weakest precondition for any redirect on a line: links and mentions
    # embed a known basename verbatim, directives embed ".md"/".cursorrules".
    extra = sorted(n for n in names if ".md" not in n and n != ".cursorrules")
    return (".md", ".cursorrules", *extra)


def _strip_trailing_punct(token: str) -> str:
    return token.rstrip(".,;:!?")


def _basename(path: str) -> str:
    return re.split(r"[/\\]", path)[-1].lower()


def _find_redirects_in_line(
    text: str,
    offset: int,
    names: frozenset[str],
) -> list[RedirectRef]:
    lowered = text.lower()
    if not any(needle in lowered for needle in _redirect_needles(names)):
        return []
    refs: list[RedirectRef] = []
    taken: list[tuple[int, int]] = []

    def overlaps(start: int, end: int) -> bool:
        return any(start < t_end and end > t_start for t_start, t_end in taken)

    for m in _LINK_RE.finditer(text):
        target = m.group(2)
        clean = target.split("?", 1)[0].split("#", 1)[0]
        if _basename(clean) in names:
            refs.append(RedirectRef(target, Span(offset + m.start(), offset + m.end()),
                                    RedirectKind.LINK))
            taken.append((m.start(), m.end()))

    for m in _DIRECTIVE_RE.finditer(text):
        if overlaps(m.start(), m.end()):
            continue
        target = _strip_trailing_punct(m.group(1))
        end = m.start(1) + len(target)
        refs.append(RedirectRef(target, Span(offset + m.start(), offset + end),
                                RedirectKind.SEE_DIRECTIVE))
        taken.append((m.start(), end))

    for m in _PATH_TOKEN_RE.finditer(text):
        token = _strip_trailing_punct(m.group(0))
        if not token or _basename(token) not in names:
            continue
        end = m.start() + len(token)
        if overlaps(m.start(), end):
            continue
        refs.append(RedirectRef(token, Span(offset + m.start(), offset + end),
                                RedirectKind.MENTION))
        taken.append((m.start(), end))

    refs.sort(key=lambda r: (r.span.start, r.span.end))
    return refs


def parse(
    raw_text: str,
    source_path: str = "<memory>",
    governance_filenames: frozenset[str] = DEFAULT_GOVERNANCE_FILENAMES,
) -> GovernanceDocument:
    """Parse raw markdown into an immutable GovernanceDocument.

    Invalid byte sequences must already be replaced (the model works on str);
    parsing itself never fails on any input text.
    """
    pieces = _split_lines(raw_text)
    n = len(pieces)

    # Fence pass: role of every line is outside (0), delimiter (1), content (2).
    OUTSIDE, DELIM, CONTENT = 0, 1, 2
    roles = [OUTSIDE] * n
    blocks: list[CodeBlock] = []
    open_idx: int | None = None
    open_marker = ""
    open_info = ""
    for i, (text, _term) in enumerate(pieces):
        m = _FENCE_RE.match(text)
        if open_idx is None:
            if m:
                open_idx, open_marker, open_info = i, m.group(1), m.group(2).strip()
                roles[i] = DELIM
        else:
            closes = (
                m is not None
                and m.group(1)[0] == open_marker[0]
                and len(m.group(1)) >= len(open_marker)
                and not m.group(2).strip()
            )
            if closes:
                roles[i] = DELIM
                content = "".join(t + term for t, term in pieces[open_idx + 1:i])
                blocks.append(CodeBlock((open_idx, i + 1), open_info, content))
                open_idx = None
            else:
                roles[i] = CONTENT
    if open_idx is not None:
        content = "".join(t + term for t, term in pieces[open_idx + 1:])
        blocks.append(CodeBlock((open_idx, n), open_info, content))

    lines: list[Line] = []
    offsets: list[int] = []
    pos = 0
    substantive = 0
    for i, (text, term) in enumerate(pieces):
        if roles[i] == DELIM:
            cls = Classification.BOILERPLATE
        else:
            cls = classify_line(text, in_code_block=roles[i] == CONTENT)
        if cls is Classification.SUBSTANTIVE:
            substantive += 1
        lines.append(Line(i, text, term, cls))
        offsets.append(pos)
        pos += len(text) + len(term)

    headings: list[tuple[int, int, str]] = []
    for i, (text, _term) in enumerate(pieces):
        if roles[i] != OUTSIDE:
            continue
        m = _HEADING_RE.match(text)
        if m:
            title = _TRAILING_HASHES_RE.sub("", m.group(2) or "")
            headings.append((i, len(m.group(1)), title))
    sections = tuple(
        Section(title, level, (start, headings[k + 1][0] if k + 1 < len(headings) else n))
        for k, (start, level, title) in enumerate(headings)
    )

    names = _mention_names(governance_filenames)
    refs: list[RedirectRef] = []
    for i, (text, _term) in enumerate(pieces):
        if roles[i] != OUTSIDE:
            continue
        refs.extend(_find_redirects_in_line(text, offsets[i], names))

    return GovernanceDocument(
        source_path=source_path,
        raw_text=raw_text,
        lines=tuple(lines),
        sections=sections,
        code_blocks=tuple(blocks),
        redirect_refs=tuple(refs),
        substantive_line_count=substantive,
        line_offsets=tuple(offsets),
    )


def detect_redirects(
    doc: GovernanceDocument,
    governance_filenames: frozenset[str] = DEFAULT_GOVERNANCE_FILENAMES,
) -> list[RedirectRef]:
    """Every governance redirect reference in the document, in document order."""
    fenced = set()
    for block in doc.code_blocks:
        fenced.update(range(*block.line_range))
    names = _mention_names(governance_filenames)
    refs: list[RedirectRef] = []
    for line in doc.lines:
        if line.index in fenced:
            continue
        refs.extend(_find_redirects_in_line(line.text, doc.line_offsets[line.index], names))
    return refs


def is_pointer_file(doc: GovernanceDocument, pointer_line_limit: int = 10) -> bool:
    """True when the file exists mainly to send the reader somewhere else."""
    if pointer_line_limit < 1:
        raise ValueError("pointer_line_limit must be >= 1")
    return bool(doc.redirect_refs) and doc.substantive_line_count <= pointer_line_limit
