"""Principle detectors: run a rule set against a document and score evidence.

A principle scores the maximum level among its fired rules, 0.0 when nothing
fires, and every match of every fired rule is kept as evidence in document
order.
"""
from __future__ import annotations

from dataclasses import dataclass

from .document import GovernanceDocument, Span
from .rules import (
    PRINCIPLE_TITLES,
    PrincipleId,
    Rule,
    RuleSet,
    SearchContext,
)

__all__ = [
    "Evidence",
    "PrincipleScore",
    "PrincipleId",
    "PRINCIPLE_TITLES",
    "detect",
    "evaluate_document",
]

_SCORE_LABELS = {1.0: "present", 0.5: "partial"}


@dataclass(frozen=True)
class Evidence:
    rule_id: str
    span: Span
    quote: str
    line: int  # 1-based line number of the span start


@dataclass(frozen=True)
class PrincipleScore:
    principle: PrincipleId
    score: float
    evidence: tuple[Evidence, ...]
    rationale: str


def _evidence_for(doc: GovernanceDocument, rule: Rule, spans: list[Span]) -> list[Evidence]:
    out = []
    for span in spans:
        out.append(Evidence(
            rule_id=rule.id,
            span=span,
            quote=doc.raw_text[span.start:span.end],
            line=doc.line_of_offset(span.start) + 1,
        ))
    return out


def _detect_with_context(
    doc: GovernanceDocument,
    principle: PrincipleId,
    rules: RuleSet,
    ctx: SearchContext,
) -> PrincipleScore:
    candidates = rules.for_principle(principle)
    if not candidates:
        raise ValueError(f"rule set has no rules for {principle.value}")
    fired: list[Rule] = []
    evidence: list[Evidence] = []
    for rule in candidates:
        spans = rule.trigger.find_matches(ctx)
        if spans:
            fired.append(rule)
            evidence.extend(_evidence_for(doc, rule, spans))
    if not fired:
        return PrincipleScore(principle, 0.0, (), "absent: no rule fired")
    score = max(rule.level for rule in fired)
    seen: set[tuple[str, int, int]] = set()
    unique: list[Evidence] = []
    for ev in sorted(evidence, key=lambda e: (e.span.start, e.span.end, e.rule_id)):
        key = (ev.rule_id, ev.span.start, ev.span.end)
        if key not in seen:
            seen.add(key)
            unique.append(ev)
    rationale = f"{_SCORE_LABELS[score]}: fired " + ", ".join(r.id for r in fired)
    return PrincipleScore(principle, score, tuple(unique), rationale)


def detect(doc: GovernanceDocument, principle: PrincipleId, rules: RuleSet) -> PrincipleScore:
    """Score one principle against the document."""
    return _detect_with_context(doc, principle, rules, SearchContext(doc))


def evaluate_document(doc: GovernanceDocument, rules: RuleSet) -> list[PrincipleScore]:
    """Score all five principles, in principle order."""
    missing = [p.value for p in PrincipleId if p not in rules.principles()]
    if missing:
        raise ValueError(f"rule set is missing rules for: {', '.join(missing)}")
    ctx = SearchContext(doc)
    return [_detect_with_context(doc, p, rules, ctx) for p in PrincipleId]
