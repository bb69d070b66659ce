"""Detector rule sets: a small trigger language compiled from YAML.

A rule ties a principle to a trigger at one of two evidence levels (0.5 or
1.0). Triggers are word/phrase patterns with a few structural anchors:
section-heading restriction, enumeration-after-phrase, graded-label pairing,
list-bearing sections, and commands inside fenced code blocks. The shipped
default rule set lives in data/default_rules.yaml; the schema is documented
in docs/rule-sets.md.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .document import Classification, GovernanceDocument, Span


class PrincipleId(Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P5 = "P5"


PRINCIPLE_TITLES = {
    PrincipleId.P1: "Success Definition",
    PrincipleId.P2: "Assessment Rubric",
    PrincipleId.P3: "Scope Boundary",
    PrincipleId.P4: "Data Classification",
    PrincipleId.P5: "Quality Gate",
}

VALID_LEVELS = (0.5, 1.0)

_GAP_TOKEN = "..."
# Word gap inside phrases: bounded so a phrase cannot bridge arbitrarily far
# across masked regions of the document.
_SEP = r"\W{1,40}"
_GAP = rf"(?:{_SEP}\w+){{0,8}}{_SEP}"

_BULLET_RE = re.compile(r"^\s{0,5}(?:[-*+]|\d{1,3}[.)])\s+\S")
_SENTENCE_CUT_RE = re.compile(r"[.!?](?:\s|$)|\n[ \t]*\n")
_ENUM_WINDOW = 300
_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+")
_TOKENS_UNSET = object()


class MalformedRule(Exception):
    """A rule definition that cannot be compiled, reported with its id."""

    def __init__(self, rule_id: str, message: str):
        super().__init__(f"rule {rule_id!r}: {message}")
        self.rule_id = rule_id


class SearchContext:
    """Per-document view the triggers match against.

    `text` has the same length as the raw text, with every character of a
    non-substantive line blanked out, so match spans index the original.
    """

    __slots__ = ("doc", "text", "_fenced", "_tokens")

    def __init__(self, doc: GovernanceDocument):
        self.doc = doc
        parts: list[str] = []
        for line in doc.lines:
            if line.classification is Classification.SUBSTANTIVE:
                parts.append(line.text)
            else:
                parts.append(" " * len(line.text))
            parts.append(line.terminator)
        self.text = "".join(parts)
        fenced: set[int] = set()
        for block in doc.code_blocks:
            fenced.update(range(*block.line_range))
        self._fenced = fenced
        self._tokens = _TOKENS_UNSET

    def in_fence(self, line_index: int) -> bool:
        return line_index in self._fenced

    @property
    def token_set(self) -> frozenset[str] | None:
        """Lowercased word tokens of the searchable text; None when the text
        is not pure ASCII and token membership cannot stand in for
        case-insensitive matching."""
        if self._tokens is _TOKENS_UNSET:
            if self.text.isascii():
                self._tokens = frozenset(_TOKEN_RE.findall(self.text.lower()))
            else:
                self._tokens = None
        return self._tokens

    def section_char_ranges(self, heading_pattern: re.Pattern[str]) -> list[tuple[int, int]]:
        ranges = []
        for section in self.doc.sections:
            if heading_pattern.search(section.heading_text):
                start_line, end_line = section.line_range
                start = self.doc.line_offsets[start_line]
                if end_line < len(self.doc.lines):
                    end = self.doc.line_offsets[end_line]
                else:
                    end = len(self.doc.raw_text)
                ranges.append((start, end))
        return ranges


def compile_phrase(phrase: str) -> re.Pattern[str]:
    """Compile a phrase into a case-insensitive word-sequence regex.

    Words must appear in order; '...' between words allows up to eight
    intervening words (never crossing more than 40 chars of separator).
    """
    words = phrase.split()
    if not words or all(w == _GAP_TOKEN for w in words):
        raise ValueError("phrase has no words")
    if words[0] == _GAP_TOKEN or words[-1] == _GAP_TOKEN:
        raise ValueError("phrase may not start or end with '...'")
    parts: list[str] = []
    pending_gap = False
    for word in words:
        if word == _GAP_TOKEN:
            pending_gap = True
            continue
        piece = re.escape(word)
        if not parts:
            parts.append(piece)
        elif pending_gap:
            parts.append(_GAP + piece)
        else:
            parts.append(_SEP + piece)
        pending_gap = False
    return re.compile(r"(?<!\w)" + "".join(parts) + r"(?!\w)", re.IGNORECASE)


def _anchor_token(phrase: str) -> str | None:
    """A literal word any match must contain, used to skip whole-text scans.

    Every maximal word-character run in an ASCII phrase is delimited by
    non-word characters in the compiled pattern, so it must appear verbatim
    (case-insensitively) as a token of the searchable text. Non-ASCII phrases
    get no anchor: single-character case folding could cross the token
    boundary there.
    """
    if not phrase.isascii():
        return None
    tokens = _TOKEN_RE.findall(phrase)
    if not tokens:
        return None
    return max(tokens, key=len).lower()


def _enumeration_follows(ctx: SearchContext, end: int) -> bool:
    """True when an enumerated field list starts right after a match."""
    window = ctx.text[end:end + _ENUM_WINDOW]
    cut = _SENTENCE_CUT_RE.search(window)
    segment = window[:cut.start() + 1] if cut else window
    if segment.count(",") + segment.count(";") >= 2:
        return True
    doc = ctx.doc
    line_idx = doc.line_of_offset(min(end, max(len(ctx.text) - 1, 0)))
    bullets = 0
    seen_blank = False
    for line in doc.lines[line_idx + 1:line_idx + 12]:
        if ctx.in_fence(line.index):
            break
        if line.classification is Classification.BLANK:
            if seen_blank:
                break
            seen_blank = True
            continue
        if _BULLET_RE.match(line.text):
            bullets += 1
            if bullets >= 2:
                return True
        else:
            break
    return False


class PhraseTrigger:
    def __init__(self, phrases: Sequence[str], section_heading: str | None = None,
                 followed_by_list: bool = False):
        self.phrases = tuple(phrases)
        self.patterns = tuple(compile_phrase(p) for p in self.phrases)
        self.anchors = tuple(_anchor_token(p) for p in self.phrases)
        self.section_pattern = (
            re.compile(section_heading, re.IGNORECASE) if section_heading else None
        )
        self.followed_by_list = followed_by_list

    def find_matches(self, ctx: SearchContext) -> list[Span]:
        ranges = None
        if self.section_pattern is not None:
            ranges = ctx.section_char_ranges(self.section_pattern)
            if not ranges:
                return []
        tokens = ctx.token_set
        spans: list[Span] = []
        for pattern, anchor in zip(self.patterns, self.anchors):
            if tokens is not None and anchor is not None and anchor not in tokens:
                continue
            for m in pattern.finditer(ctx.text):
                if ranges is not None and not any(
                    lo <= m.start() < hi for lo, hi in ranges
                ):
                    continue
                if self.followed_by_list and not _enumeration_follows(ctx, m.end()):
                    continue
                spans.append(Span(m.start(), m.end()))
        return spans


class AllOfTrigger:
    def __init__(self, children: Sequence[object]):
        self.children = tuple(children)

    def find_matches(self, ctx: SearchContext) -> list[Span]:
        collected: list[Span] = []
        for child in self.children:
            matches = child.find_matches(ctx)
            if not matches:
                return []
            collected.extend(matches)
        return collected


class LabelPairTrigger:
    """Fires when enough distinct grade labels each carry a defining clause."""

    def __init__(self, labels: Sequence[str], paired_with: str = "if",
                 max_gap: int = 3, min_distinct: int = 2):
        self.labels = tuple(labels)
        self.min_distinct = min_distinct
        pair = re.escape(paired_with)
        self.patterns = {
            label: re.compile(
                rf"(?<!\w){re.escape(label)}(?:{_SEP}\w+){{0,{max_gap}}}?{_SEP}{pair}(?!\w)",
                re.IGNORECASE,
            )
            for label in self.labels
        }
        self.anchors = {
            label: _anchor_token(f"{label} {paired_with}") for label in self.labels
        }

    def find_matches(self, ctx: SearchContext) -> list[Span]:
        tokens = ctx.token_set
        per_label: list[list[Span]] = []
        for label in self.labels:
            anchor = self.anchors[label]
            if tokens is not None and anchor is not None and anchor not in tokens:
                continue
            found = [Span(m.start(), m.end())
                     for m in self.patterns[label].finditer(ctx.text)]
            if found:
                per_label.append(found)
        if len(per_label) < self.min_distinct:
            return []
        return [span for group in per_label for span in group]


class SectionListTrigger:
    """Fires on a section with a matching heading and enough list items."""

    def __init__(self, heading_pattern: str, min_list_items: int = 2):
        self.pattern = re.compile(heading_pattern, re.IGNORECASE)
        self.min_list_items = min_list_items

    def find_matches(self, ctx: SearchContext) -> list[Span]:
        doc = ctx.doc
        spans: list[Span] = []
        for section in doc.sections:
            if not self.pattern.search(section.heading_text):
                continue
            start, end = section.line_range
            items = sum(
                1
                for line in doc.lines[start + 1:end]
                if not ctx.in_fence(line.index) and _BULLET_RE.match(line.text)
            )
            if items >= self.min_list_items:
                spans.append(doc.line_span(start))
        return spans


class CommandTrigger:
    """Fires on code-block command lines like `npm test` or `cargo fmt --check`."""

    def __init__(self, programs: Sequence[str], subcommands: str):
        self.programs = frozenset(p.lower() for p in programs)
        self.subcommand_re = re.compile(subcommands, re.IGNORECASE)

    def find_matches(self, ctx: SearchContext) -> list[Span]:
        doc = ctx.doc
        spans: list[Span] = []
        for block in doc.code_blocks:
            start, end = block.line_range
            for line in doc.lines[start + 1:min(end, len(doc.lines))]:
                tokens = line.text.split()
                while tokens and tokens[0] in ("$", ">"):
                    tokens = tokens[1:]
                if not tokens or tokens[0].lower() not in self.programs:
                    continue
                if not any(self.subcommand_re.search(tok) for tok in tokens[1:]):
                    continue
                stripped = line.text.strip()
                col = line.text.index(stripped[0]) if stripped else 0
                base = doc.line_offsets[line.index]
                spans.append(Span(base + col, base + col + len(stripped)))
        return spans


@dataclass(frozen=True)
class Rule:
    id: str
    principle: PrincipleId
    level: float
    description: str
    trigger: object


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    redirect_filenames: frozenset[str] | None = None

    def for_principle(self, principle: PrincipleId) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.principle is principle)

    def principles(self) -> set[PrincipleId]:
        return {r.principle for r in self.rules}


def _build_trigger(rule_id: str, match: object) -> object:
    if not isinstance(match, dict) or not match:
        raise MalformedRule(rule_id, "match must be a non-empty mapping")
    known = {"phrases", "section_heading", "followed_by_list", "all_of",
             "labels", "paired_with", "max_gap", "min_distinct",
             "min_list_items", "commands"}
    unknown = set(match) - known
    if unknown:
        raise MalformedRule(rule_id, f"unknown match keys: {sorted(unknown)}")
    try:
        if "all_of" in match:
            children = match["all_of"]
            if not isinstance(children, list) or len(children) < 2:
                raise MalformedRule(rule_id, "all_of needs a list of at least two matchers")
            return AllOfTrigger([_build_trigger(rule_id, child) for child in children])
        if "commands" in match:
            spec = match["commands"]
            if not isinstance(spec, dict) or "programs" not in spec or "subcommands" not in spec:
                raise MalformedRule(rule_id, "commands needs programs and subcommands")
            return CommandTrigger(spec["programs"], spec["subcommands"])
        if "labels" in match:
            return LabelPairTrigger(
                match["labels"],
                paired_with=match.get("paired_with", "if"),
                max_gap=int(match.get("max_gap", 3)),
                min_distinct=int(match.get("min_distinct", 2)),
            )
        if "phrases" in match:
            phrases = match["phrases"]
            if not isinstance(phrases, list) or not all(isinstance(p, str) for p in phrases):
                raise MalformedRule(rule_id, "phrases must be a list of strings")
            return PhraseTrigger(
                phrases,
                section_heading=match.get("section_heading"),
                followed_by_list=bool(match.get("followed_by_list", False)),
            )
        if "section_heading" in match:
            return SectionListTrigger(
                match["section_heading"],
                min_list_items=int(match.get("min_list_items", 2)),
            )
    except MalformedRule:
        raise
    except (re.error, ValueError, TypeError, KeyError) as exc:
        raise MalformedRule(rule_id, f"pattern failed to compile: {exc}") from exc
    raise MalformedRule(rule_id, "no recognized matcher in match")


def _parse_rule(raw: object, position: int) -> Rule:
    if not isinstance(raw, dict):
        raise MalformedRule(f"<#{position}>", "rule must be a mapping")
    rule_id = raw.get("id")
    if not isinstance(rule_id, str) or not rule_id:
        raise MalformedRule(f"<#{position}>", "missing id")
    principle_raw = raw.get("principle")
    try:
        principle = PrincipleId(principle_raw)
    except ValueError:
        raise MalformedRule(rule_id, f"unknown principle {principle_raw!r}") from None
    level = raw.get("level")
    if not isinstance(level, (int, float)) or float(level) not in VALID_LEVELS:
        raise MalformedRule(rule_id, f"level must be one of {VALID_LEVELS}, got {level!r}")
    trigger = _build_trigger(rule_id, raw.get("match"))
    return Rule(
        id=rule_id,
        principle=principle,
        level=float(level),
        description=str(raw.get("description", "")),
        trigger=trigger,
    )


def build_rule_set(data: object) -> RuleSet:
    """Compile a loaded rules mapping into a RuleSet, validating everything."""
    if not isinstance(data, dict) or not isinstance(data.get("rules"), list):
        raise MalformedRule("<document>", "rule file must be a mapping with a rules list")
    rules = [
        _parse_rule(raw, position) for position, raw in enumerate(data["rules"])
    ]
    seen: set[str] = set()
    for rule in rules:
        if rule.id in seen:
            raise MalformedRule(rule.id, "duplicate rule id")
        seen.add(rule.id)
    redirect_filenames = None
    targets = data.get("redirect_targets")
    if targets is not None:
        if not isinstance(targets, list) or not all(isinstance(t, str) for t in targets):
            raise MalformedRule("<document>", "redirect_targets must be a list of filenames")
        redirect_filenames = frozenset(t.lower() for t in targets)
    return RuleSet(tuple(rules), redirect_filenames)


def load_rules(path: str | Path) -> RuleSet:
    """Load and compile a rule set from a YAML (or JSON) file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedRule("<document>", f"unparseable rule file: {exc}") from exc
    return build_rule_set(data)


def default_rules() -> RuleSet:
    """The rule set shipped with the package."""
    text = resources.files("agentlint").joinpath("data/default_rules.yaml").read_text(
        encoding="utf-8"
    )
    return build_rule_set(yaml.safe_load(text))
