"""Static analysis for AI-agent governance files.

Parses AGENTS.md-style instruction files, scores them against five
structural-completeness principles, follows governance redirects, and
aggregates results across a corpus.
"""
from __future__ import annotations

from .detectors import Evidence, PrincipleScore, detect, evaluate_document
from .document import (
    Classification,
    GovernanceDocument,
    RedirectKind,
    RedirectRef,
    classify_line,
    detect_redirects,
    is_pointer_file,
    parse,
)
from .resolver import (
    FetchError,
    FetchErrorKind,
    LocalHttpFetcher,
    MappingFetcher,
    RedirectResolution,
    ResolutionStatus,
    resolve,
)
from .rules import MalformedRule, PrincipleId, Rule, RuleSet, default_rules, load_rules
from .scoring import (
    Archetype,
    Band,
    Evaluation,
    InvalidScoreSet,
    Variant,
    aggregate,
    band_for_total,
    classify_archetype,
)
from .corpus import (
    CorpusEntry,
    CorpusReport,
    EvaluatorScoreSet,
    FileMetadata,
    Inclusion,
    InsufficientPanels,
    PanelFormatError,
    ReportEntry,
    apply_filters,
    compute_convergence,
    evaluate_corpus,
    ingest_panels,
    kendall_tau_b,
    load_panel,
    near_duplicate,
)
from .output import emit_sarif, emit_structured, parse_structured, render_report_text

__version__ = "0.1.0"

__all__ = [
    "Archetype",
    "Band",
    "Classification",
    "CorpusEntry",
    "CorpusReport",
    "Evaluation",
    "EvaluatorScoreSet",
    "Evidence",
    "FetchError",
    "FetchErrorKind",
    "FileMetadata",
    "GovernanceDocument",
    "Inclusion",
    "InsufficientPanels",
    "InvalidScoreSet",
    "LocalHttpFetcher",
    "MalformedRule",
    "MappingFetcher",
    "PanelFormatError",
    "PrincipleId",
    "PrincipleScore",
    "RedirectKind",
    "RedirectRef",
    "RedirectResolution",
    "ReportEntry",
    "ResolutionStatus",
    "Rule",
    "RuleSet",
    "Variant",
    "aggregate",
    "apply_filters",
    "band_for_total",
    "classify_archetype",
    "classify_line",
    "compute_convergence",
    "default_rules",
    "detect",
    "detect_redirects",
    "emit_sarif",
    "emit_structured",
    "evaluate_corpus",
    "evaluate_document",
    "ingest_panels",
    "is_pointer_file",
    "kendall_tau_b",
    "load_panel",
    "load_rules",
    "near_duplicate",
    "parse",
    "parse_structured",
    "render_report_text",
    "resolve",
]
