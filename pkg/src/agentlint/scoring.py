"""Turn five principle scores into a banded, archetyped evaluation.

Totals are sums of values from {0.0, 0.5, 1.0}; every reachable total is an
exact binary float, so band and threshold comparisons never see drift.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .detectors import PrincipleScore
from .resolver import RedirectResolution, ResolutionStatus
from .rules import PrincipleId

DEFAULT_THRESHOLD = 2.5

_VALID_SCORES = (0.0, 0.5, 1.0)


class Band(Enum):
    STRUCTURALLY_COMPLETE = "structurally-complete"
    FUNCTIONAL_WITH_GAPS = "functional-with-gaps"
    STRUCTURALLY_INCOMPLETE = "structurally-incomplete"


class Archetype(Enum):
    BROKEN_REFERENCE = "broken-reference"
    MINIMAL_POINTER = "minimal-pointer"
    COMPLETE_SPECIFICATION = "complete-specification"
    CONSTRAINED_EXECUTOR = "constrained-executor"
    OPERATIONAL_GUIDE = "operational-guide"
    UNCLASSIFIED = "unclassified"


class Variant(Enum):
    STANDALONE = "standalone"
    RESOLVED = "resolved"


class InvalidScoreSet(Exception):
    pass


@dataclass(frozen=True)
class Evaluation:
    principle_scores: tuple[PrincipleScore, ...]
    total: float
    band: Band
    below_threshold: bool
    archetype: Archetype
    variant: Variant

    def score_of(self, principle: PrincipleId) -> float:
        for ps in self.principle_scores:
            if ps.principle is principle:
                return ps.score
        raise KeyError(principle)


def band_for_total(total: float) -> Band:
    if total >= 4.0:
        return Band.STRUCTURALLY_COMPLETE
    if total >= 3.0:
        return Band.FUNCTIONAL_WITH_GAPS
    return Band.STRUCTURALLY_INCOMPLETE


def aggregate(
    scores: list[PrincipleScore] | tuple[PrincipleScore, ...],
    threshold: float = DEFAULT_THRESHOLD,
    variant: Variant = Variant.STANDALONE,
) -> Evaluation:
    """Validate a five-score set and compute total, band, and threshold flag."""
    if not 0.0 < threshold <= 5.0:
        raise ValueError(f"threshold must be in (0, 5], got {threshold}")
    seen: dict[PrincipleId, PrincipleScore] = {}
    for ps in scores:
        if ps.principle in seen:
            raise InvalidScoreSet(f"duplicate principle {ps.principle.value}")
        if ps.score not in _VALID_SCORES:
            raise InvalidScoreSet(
                f"{ps.principle.value} score {ps.score!r} not in {_VALID_SCORES}"
            )
        seen[ps.principle] = ps
    missing = [p.value for p in PrincipleId if p not in seen]
    if missing:
        raise InvalidScoreSet(f"missing principles: {', '.join(missing)}")
    ordered = tuple(seen[p] for p in PrincipleId)
    half_units = sum(int(ps.score * 2) for ps in ordered)
    total = half_units / 2
    return Evaluation(
        principle_scores=ordered,
        total=total,
        band=band_for_total(total),
        below_threshold=total < threshold,
        archetype=Archetype.UNCLASSIFIED,
        variant=variant,
    )


def classify_archetype(
    evaluation: Evaluation,
    redirect: RedirectResolution | None = None,
) -> Archetype:
    """First matching archetype rule wins; always returns something.

    `redirect` is the file's RedirectResolution (or None when resolution was
    not attempted). Expects a standalone-variant evaluation of the same file.
    """
    status = redirect.status if redirect is not None else ResolutionStatus.NONE
    if status in (ResolutionStatus.BROKEN, ResolutionStatus.CYCLIC):
        return Archetype.BROKEN_REFERENCE
    if status is ResolutionStatus.RESOLVED and evaluation.total == 0.0:
        return Archetype.MINIMAL_POINTER
    by_principle = {ps.principle: ps.score for ps in evaluation.principle_scores}
    p1 = by_principle[PrincipleId.P1]
    p2 = by_principle[PrincipleId.P2]
    p3 = by_principle[PrincipleId.P3]
    p4 = by_principle[PrincipleId.P4]
    p5 = by_principle[PrincipleId.P5]
    if all(s == 1.0 for s in (p1, p2, p3, p4, p5)):
        return Archetype.COMPLETE_SPECIFICATION
    if p3 >= 0.5 and p5 >= 0.5 and p2 >= 0.5 and p4 < 0.5:
        return Archetype.CONSTRAINED_EXECUTOR
    if p3 >= 0.5 and p5 >= 0.5 and max(p1, p2, p4) <= 0.5 and p2 < 0.5:
        return Archetype.OPERATIONAL_GUIDE
    return Archetype.UNCLASSIFIED


def with_archetype(evaluation: Evaluation, archetype: Archetype) -> Evaluation:
    return replace(evaluation, archetype=archetype)
