"""Corpus pipeline: filter a set of governance files, evaluate every survivor,
and aggregate per-principle and per-file statistics, optionally joined with
externally supplied evaluator score panels.
"""
from __future__ import annotations

import calendar
import math
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date, datetime
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .document import (
    AUTO_GENERATION_MARKERS,
    DEFAULT_GOVERNANCE_FILENAMES,
    Classification,
    GovernanceDocument,
    is_pointer_file,
    parse,
)
from .detectors import evaluate_document
from .resolver import (
    DEFAULT_DEPTH_CAP,
    LocalHttpFetcher,
    RedirectResolution,
    ResolutionStatus,
    TargetFetcher,
    resolve,
)
from .rules import PrincipleId, RuleSet
from .scoring import (
    DEFAULT_THRESHOLD,
    Archetype,
    Evaluation,
    Variant,
    aggregate,
    classify_archetype,
    with_archetype,
)

DEFAULT_MIN_SUBSTANTIVE_LINES = 10
DEFAULT_POINTER_LINE_LIMIT = 10
DEFAULT_DUPLICATE_THRESHOLD = 0.9
DEFAULT_SHINGLE_SIZE = 5
INACTIVITY_MONTHS = 6


class Inclusion(Enum):
    INCLUDED = "included"
    INCLUDED_AS_POINTER = "included-as-pointer"
    EXCLUDED_TOO_SHORT = "excluded-too-short"
    EXCLUDED_INACTIVE = "excluded-inactive"
    EXCLUDED_GENERATED = "excluded-generated"
    EXCLUDED_DUPLICATE = "excluded-duplicate"


class InsufficientPanels(Exception):
    pass


class PanelFormatError(Exception):
    pass


@dataclass(frozen=True)
class FileMetadata:
    last_modified: date | None = None
    origin: str | None = None


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    metadata: FileMetadata
    document: GovernanceDocument
    inclusion: Inclusion


@dataclass(frozen=True)
class EvaluatorScoreSet:
    name: str
    scores: dict[str, tuple[float, float, float, float, float]]


@dataclass(frozen=True)
class RedirectSummary:
    status: ResolutionStatus
    failure_detail: str | None
    resolved_path: str | None
    chain: tuple[tuple[str, str, str], ...]  # (source, target, kind)


@dataclass(frozen=True)
class ReportEntry:
    path: str
    inclusion: Inclusion | None
    last_modified: date | None
    origin: str | None
    is_hybrid: bool
    error: str | None
    redirect: RedirectSummary | None
    standalone: Evaluation | None
    resolved: Evaluation | None


@dataclass(frozen=True)
class EvaluatorStats:
    name: str
    files: int
    mean_total: float | None
    median_total: float | None
    fraction_below: float | None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class RankAgreement:
    panel_a: str
    panel_b: str
    kendall_tau: float | None


@dataclass(frozen=True)
class Hotspot:
    path: str
    principle: PrincipleId
    scores: tuple[tuple[str, float], ...]  # (evaluator, score) in panel order


@dataclass(frozen=True)
class Convergence:
    rank_agreement: tuple[RankAgreement, ...]
    hotspots: tuple[Hotspot, ...]


@dataclass(frozen=True)
class CorpusReport:
    threshold: float
    entries: tuple[ReportEntry, ...]
    evaluated_files: int
    principle_means: dict[str, float] | None
    mean_total: float | None
    median_total: float | None
    fraction_below_threshold_files: float | None
    fraction_below_threshold_pairs: float | None
    archetype_counts: dict[str, int]
    inclusion_counts: dict[str, int]
    panels: tuple[EvaluatorStats, ...] = ()
    panel_overall: EvaluatorStats | None = None
    convergence: Convergence | None = None


def _months_before(day: date, months: int) -> date:
    index = day.year * 12 + (day.month - 1) - months
    year, month0 = divmod(index, 12)
    month = month0 + 1
    return date(year, month, min(day.day, calendar.monthrange(year, month)[1]))


def _as_date(value) -> date | None:
    if value is None:
        return None
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    if isinstance(value, str):
        return date.fromisoformat(value.strip())
    raise ValueError(f"unsupported last_modified value: {value!r}")


def _shingles(doc: GovernanceDocument, size: int) -> frozenset[tuple[str, ...]]:
    tokens: list[str] = []
    for line in doc.lines:
        if line.classification is Classification.SUBSTANTIVE:
            tokens.extend(line.text.lower().split())
    if len(tokens) < size:
        return frozenset()
    return frozenset(tuple(tokens[i:i + size]) for i in range(len(tokens) - size + 1))


def _jaccard(sa: frozenset, sb: frozenset) -> float:
    if not sa and not sb:
        return 1.0
    inter = len(sa & sb)
    return inter / (len(sa) + len(sb) - inter)


def _jaccard_at_least(sa: frozenset, sb: frozenset, threshold: float) -> bool:
    # Jaccard is capped at |small|/|large|; skip the intersection when even
    # that bound falls short. The bound is the exact value _jaccard returns
    # for a containment pair, so the shortcut never flips a verdict.
    small, large = sorted((len(sa), len(sb)))
    if large and small / large < threshold:
        return False
    return _jaccard(sa, sb) >= threshold


def shingle_similarity(
    a: GovernanceDocument,
    b: GovernanceDocument,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
) -> float:
    """Jaccard similarity of word shingles over normalized substantive text."""
    return _jaccard(_shingles(a, shingle_size), _shingles(b, shingle_size))


def near_duplicate(
    a: GovernanceDocument,
    b: GovernanceDocument,
    threshold: float = DEFAULT_DUPLICATE_THRESHOLD,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
) -> bool:
    return shingle_similarity(a, b, shingle_size) >= threshold


def _has_generation_marker(doc: GovernanceDocument) -> bool:
    for line in doc.lines:
        lowered = line.text.lower()
        if any(marker in lowered for marker in AUTO_GENERATION_MARKERS):
            return True
    return False


def apply_filters(
    files: Sequence[tuple[str, str, Mapping | None]],
    reference_date: date | None = None,
    min_substantive_lines: int = DEFAULT_MIN_SUBSTANTIVE_LINES,
    pointer_line_limit: int = DEFAULT_POINTER_LINE_LIMIT,
    duplicate_threshold: float = DEFAULT_DUPLICATE_THRESHOLD,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
    governance_filenames: frozenset[str] = DEFAULT_GOVERNANCE_FILENAMES,
) -> list[CorpusEntry]:
    """Assign each file its inclusion status; first matching rule wins.

    Rule order: pointer exception, substance floor, recency, generation
    marker, near-duplicate. Files are processed in path order so the
    lexicographically smallest of a duplicate cluster survives regardless of
    input order. The recency rule only applies to files whose metadata
    carries last_modified; the cutoff is six calendar months before
    reference_date (today when unset).
    """
    prepared: list[tuple[str, GovernanceDocument, FileMetadata]] = []
    for path, raw_text, metadata in files:
        meta = metadata or {}
        parsed_meta = FileMetadata(
            last_modified=_as_date(meta.get("last_modified")),
            origin=meta.get("origin"),
        )
        doc = parse(raw_text, source_path=path,
                    governance_filenames=governance_filenames)
        prepared.append((path, doc, parsed_meta))
    prepared.sort(key=lambda item: item[0])

    cutoff = _months_before(reference_date or date.today(), INACTIVITY_MONTHS)
    entries: list[CorpusEntry] = []
    kept_shingles: list[frozenset] = []
    for path, doc, meta in prepared:
        if is_pointer_file(doc, pointer_line_limit):
            inclusion = Inclusion.INCLUDED_AS_POINTER
        elif doc.substantive_line_count <= min_substantive_lines:
            inclusion = Inclusion.EXCLUDED_TOO_SHORT
        elif meta.last_modified is not None and meta.last_modified < cutoff:
            inclusion = Inclusion.EXCLUDED_INACTIVE
        elif _has_generation_marker(doc):
            inclusion = Inclusion.EXCLUDED_GENERATED
        else:
            shingles = _shingles(doc, shingle_size)
            if any(_jaccard_at_least(shingles, kept, duplicate_threshold)
                   for kept in kept_shingles):
                inclusion = Inclusion.EXCLUDED_DUPLICATE
            else:
                inclusion = Inclusion.INCLUDED
                kept_shingles.append(shingles)
        entries.append(CorpusEntry(path, meta, doc, inclusion))
    return entries


def _redirect_summary(resolution: RedirectResolution) -> RedirectSummary:
    resolved_path = None
    if resolution.resolved_document is not None:
        resolved_path = resolution.resolved_document.source_path
    return RedirectSummary(
        status=resolution.status,
        failure_detail=resolution.failure_detail,
        resolved_path=resolved_path,
        chain=tuple(
            (step.source, step.ref.target, step.ref.kind.value)
            for step in resolution.chain
        ),
    )


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2


def evaluate_corpus(
    entries: Sequence[CorpusEntry],
    rules: RuleSet,
    threshold: float = DEFAULT_THRESHOLD,
    resolve_redirects: bool = True,
    fetcher: TargetFetcher | None = None,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    pointer_line_limit: int = DEFAULT_POINTER_LINE_LIMIT,
    governance_filenames: frozenset[str] = DEFAULT_GOVERNANCE_FILENAMES,
    errors: Sequence[tuple[str, str]] = (),
) -> CorpusReport:
    """Evaluate every included entry and aggregate standalone statistics.

    Pointer entries also carry a resolved evaluation when their chain
    resolves. `errors` lists (path, message) for unreadable inputs; they are
    reported but never abort the run.
    """
    if fetcher is None:
        fetcher = LocalHttpFetcher()

    report_entries: list[ReportEntry] = []
    for path, message in errors:
        report_entries.append(ReportEntry(
            path=path, inclusion=None, last_modified=None, origin=None,
            is_hybrid=False, error=message, redirect=None,
            standalone=None, resolved=None,
        ))

    for entry in entries:
        evaluated = entry.inclusion in (Inclusion.INCLUDED,
                                        Inclusion.INCLUDED_AS_POINTER)
        standalone = resolved_eval = None
        redirect_summary = None
        is_hybrid = False
        if evaluated:
            resolution = None
            if resolve_redirects:
                resolution = resolve(
                    entry.document, fetcher, depth_cap,
                    pointer_line_limit=pointer_line_limit,
                    governance_filenames=governance_filenames,
                )
                if resolution.status is not ResolutionStatus.NONE:
                    redirect_summary = _redirect_summary(resolution)
            scores = evaluate_document(entry.document, rules)
            standalone = aggregate(scores, threshold)
            standalone = with_archetype(
                standalone, classify_archetype(standalone, resolution))
            if resolution is not None and resolution.resolved_document is not None:
                resolved_scores = evaluate_document(
                    resolution.resolved_document, rules)
                resolved_eval = aggregate(resolved_scores, threshold,
                                          variant=Variant.RESOLVED)
            is_hybrid = (
                entry.inclusion is Inclusion.INCLUDED
                and bool(entry.document.redirect_refs)
            )
        report_entries.append(ReportEntry(
            path=entry.path,
            inclusion=entry.inclusion,
            last_modified=entry.metadata.last_modified,
            origin=entry.metadata.origin,
            is_hybrid=is_hybrid,
            error=None,
            redirect=redirect_summary,
            standalone=standalone,
            resolved=resolved_eval,
        ))

    report_entries.sort(key=lambda e: e.path)
    scored = [e.standalone for e in report_entries if e.standalone is not None]
    inclusion_counts = Counter(
        e.inclusion.value for e in report_entries if e.inclusion is not None)
    archetype_counts = Counter(ev.archetype.value for ev in scored)

    principle_means = None
    mean_total = median_total = fraction_below = None
    if scored:
        principle_means = {
            p.value: _mean([ev.score_of(p) for ev in scored]) for p in PrincipleId
        }
        totals = [ev.total for ev in scored]
        mean_total = _mean(totals)
        median_total = _median(totals)
        fraction_below = sum(1 for ev in scored if ev.below_threshold) / len(scored)

    return CorpusReport(
        threshold=threshold,
        entries=tuple(report_entries),
        evaluated_files=len(scored),
        principle_means=principle_means,
        mean_total=mean_total,
        median_total=median_total,
        fraction_below_threshold_files=fraction_below,
        fraction_below_threshold_pairs=None,
        archetype_counts={a.value: archetype_counts.get(a.value, 0)
                          for a in Archetype},
        inclusion_counts={i.value: inclusion_counts.get(i.value, 0)
                          for i in Inclusion},
    )


def kendall_tau_b(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Tie-corrected Kendall rank correlation; None when undefined."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("sequences differ in length")
    if n < 2:
        return None
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if dx == 0 and dy == 0:
                tied_x += 1
                tied_y += 1
            elif dx == 0:
                tied_x += 1
            elif dy == 0:
                tied_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - tied_x) * (n0 - tied_y))
    if denom == 0:
        return None
    return (concordant - discordant) / denom


def _validate_panel(panel: EvaluatorScoreSet) -> None:
    if not panel.name:
        raise PanelFormatError("evaluator name must be non-empty")
    for path, values in panel.scores.items():
        if len(values) != 5:
            raise PanelFormatError(
                f"{panel.name}: {path} needs 5 scores, got {len(values)}")
        for value in values:
            if value not in (0.0, 0.5, 1.0):
                raise PanelFormatError(
                    f"{panel.name}: {path} has invalid score {value!r}")


def load_panel(path: str | Path) -> EvaluatorScoreSet:
    """Load one evaluator's scores from YAML: {evaluator, scores: {path: [5]}}."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise PanelFormatError(f"unparseable panel file {path}: {exc}") from exc
    if not isinstance(data, dict) or "evaluator" not in data or "scores" not in data:
        raise PanelFormatError(f"{path}: panel needs evaluator and scores fields")
    scores_raw = data["scores"]
    if not isinstance(scores_raw, dict):
        raise PanelFormatError(f"{path}: scores must map path -> five scores")
    scores: dict[str, tuple[float, float, float, float, float]] = {}
    for file_path, values in scores_raw.items():
        if not isinstance(values, list):
            raise PanelFormatError(f"{path}: scores for {file_path} must be a list")
        scores[str(file_path)] = tuple(float(v) for v in values)
    panel = EvaluatorScoreSet(str(data["evaluator"]), scores)
    _validate_panel(panel)
    return panel


def ingest_panels(
    report: CorpusReport,
    panels: Sequence[EvaluatorScoreSet],
) -> CorpusReport:
    """Join evaluator score panels onto a report; returns an updated report.

    Panel entries for files missing from the report produce warnings; report
    files missing from a panel are simply excluded from that evaluator's
    stats. Convergence requires at least two panels and is computed over the
    files every panel covers.
    """
    for panel in panels:
        _validate_panel(panel)
    evaluated_paths = [e.path for e in report.entries if e.standalone is not None]
    path_set = set(evaluated_paths)

    stats: list[EvaluatorStats] = []
    all_pair_totals: list[float] = []
    below_pairs = 0
    for panel in panels:
        warnings = tuple(
            f"unknown file in panel {panel.name}: {path}"
            for path in sorted(set(panel.scores) - path_set)
        )
        covered = [p for p in evaluated_paths if p in panel.scores]
        totals = [sum(panel.scores[p]) for p in covered]
        all_pair_totals.extend(totals)
        below = sum(1 for t in totals if t < report.threshold)
        below_pairs += below
        stats.append(EvaluatorStats(
            name=panel.name,
            files=len(covered),
            mean_total=_mean(totals) if totals else None,
            median_total=_median(totals) if totals else None,
            fraction_below=below / len(totals) if totals else None,
            warnings=warnings,
        ))

    fraction_pairs = None
    panel_overall = None
    if all_pair_totals:
        fraction_pairs = below_pairs / len(all_pair_totals)
        panel_overall = EvaluatorStats(
            name="overall",
            files=len(all_pair_totals),
            mean_total=_mean(all_pair_totals),
            median_total=_median(all_pair_totals),
            fraction_below=fraction_pairs,
        )

    convergence = None
    if len(panels) >= 2:
        convergence = compute_convergence(panels, evaluated_paths)

    return replace(
        report,
        fraction_below_threshold_pairs=fraction_pairs,
        panels=tuple(stats),
        panel_overall=panel_overall,
        convergence=convergence,
    )


def compute_convergence(
    panels: Sequence[EvaluatorScoreSet],
    paths: Iterable[str] | None = None,
) -> Convergence:
    """Rank agreement of per-principle means across panels, plus hotspots."""
    if len(panels) < 2:
        raise InsufficientPanels("convergence needs at least two panels")
    shared = set.intersection(*(set(p.scores) for p in panels))
    if paths is not None:
        shared &= set(paths)
    ordered = sorted(shared)

    def principle_means(panel: EvaluatorScoreSet) -> list[float]:
        return [
            _mean([panel.scores[path][k] for path in ordered]) if ordered else 0.0
            for k in range(5)
        ]

    means = {panel.name: principle_means(panel) for panel in panels}
    agreement = tuple(
        RankAgreement(a.name, b.name, kendall_tau_b(means[a.name], means[b.name]))
        for a, b in combinations(panels, 2)
    )

    hotspots: list[Hotspot] = []
    principles = list(PrincipleId)
    for path in ordered:
        for k, principle in enumerate(principles):
            values = [panel.scores[path][k] for panel in panels]
            if 0.0 in values and 1.0 in values:
                hotspots.append(Hotspot(
                    path=path,
                    principle=principle,
                    scores=tuple((panel.name, panel.scores[path][k])
                                 for panel in panels),
                ))
    return Convergence(agreement, tuple(hotspots))
