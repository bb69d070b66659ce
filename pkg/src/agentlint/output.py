"""Report serialization: human text, structured JSON, and SARIF 2.1.0.

The structured format is deterministic (two identical runs produce identical
bytes) and lossless (parse_structured rebuilds an equal report).
"""
from __future__ import annotations

import json
from datetime import date

from .corpus import (
    Convergence,
    CorpusReport,
    EvaluatorStats,
    Hotspot,
    Inclusion,
    RankAgreement,
    RedirectSummary,
    ReportEntry,
)
from .detectors import PRINCIPLE_TITLES, Evidence, PrincipleScore
from .document import Span
from .resolver import ResolutionStatus
from .rules import PrincipleId
from .scoring import Archetype, Band, Evaluation, Variant

TOOL_NAME = "agentlint"
TOOL_VERSION = "0.1.0"
SARIF_VERSION = "2.1.0"
_SARIF_SCHEMA = "https://docs.oasis-open.org/sarif/sarif/v2.1.0/os/schemas/sarif-schema-2.1.0.json"


# ---------------------------------------------------------------------------
# structured JSON

def _evidence_to_json(ev: Evidence) -> dict:
    return {
        "rule_id": ev.rule_id,
        "start": ev.span.start,
        "end": ev.span.end,
        "line": ev.line,
        "quote": ev.quote,
    }


def _evaluation_to_json(ev: Evaluation) -> dict:
    return {
        "variant": ev.variant.value,
        "scores": [
            {
                "principle": ps.principle.value,
                "score": float(ps.score),
                "rationale": ps.rationale,
                "evidence": [_evidence_to_json(e) for e in ps.evidence],
            }
            for ps in ev.principle_scores
        ],
        "total": float(ev.total),
        "band": ev.band.value,
        "below_threshold": ev.below_threshold,
        "archetype": ev.archetype.value,
    }


def _redirect_to_json(summary: RedirectSummary) -> dict:
    return {
        "status": summary.status.value,
        "failure_detail": summary.failure_detail,
        "resolved_path": summary.resolved_path,
        "chain": [
            {"source": source, "target": target, "kind": kind}
            for source, target, kind in summary.chain
        ],
    }


def _entry_to_json(entry: ReportEntry) -> dict:
    return {
        "path": entry.path,
        "inclusion": entry.inclusion.value if entry.inclusion else None,
        "last_modified": entry.last_modified.isoformat() if entry.last_modified else None,
        "origin": entry.origin,
        "is_hybrid": entry.is_hybrid,
        "error": entry.error,
        "redirect": _redirect_to_json(entry.redirect) if entry.redirect else None,
        "standalone": _evaluation_to_json(entry.standalone) if entry.standalone else None,
        "resolved": _evaluation_to_json(entry.resolved) if entry.resolved else None,
    }


def _stats_to_json(stats: EvaluatorStats) -> dict:
    return {
        "name": stats.name,
        "files": stats.files,
        "mean_total": stats.mean_total,
        "median_total": stats.median_total,
        "fraction_below": stats.fraction_below,
        "warnings": list(stats.warnings),
    }


def _convergence_to_json(conv: Convergence) -> dict:
    return {
        "rank_agreement": [
            {"panel_a": ra.panel_a, "panel_b": ra.panel_b, "kendall_tau": ra.kendall_tau}
            for ra in conv.rank_agreement
        ],
        "hotspots": [
            {
                "path": h.path,
                "principle": h.principle.value,
                "scores": [{"evaluator": name, "score": score}
                           for name, score in h.scores],
            }
            for h in conv.hotspots
        ],
    }


def report_to_dict(report: CorpusReport, config: dict | None = None) -> dict:
    return {
        "tool_version": TOOL_VERSION,
        "config": dict(config or {}),
        "entries": [_entry_to_json(e) for e in report.entries],
        "aggregates": {
            "threshold": report.threshold,
            "evaluated_files": report.evaluated_files,
            "principle_means": report.principle_means,
            "mean_total": report.mean_total,
            "median_total": report.median_total,
            "fraction_below_threshold_files": report.fraction_below_threshold_files,
            "fraction_below_threshold_pairs": report.fraction_below_threshold_pairs,
            "archetype_counts": report.archetype_counts,
            "inclusion_counts": report.inclusion_counts,
            "panel_overall": _stats_to_json(report.panel_overall)
            if report.panel_overall else None,
            "convergence": _convergence_to_json(report.convergence)
            if report.convergence else None,
        },
        "panels": [_stats_to_json(s) for s in report.panels],
    }


def emit_structured(report: CorpusReport, config: dict | None = None) -> bytes:
    payload = report_to_dict(report, config)
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


def _evidence_from_json(raw: dict) -> Evidence:
    return Evidence(
        rule_id=raw["rule_id"],
        span=Span(raw["start"], raw["end"]),
        quote=raw["quote"],
        line=raw["line"],
    )


def _evaluation_from_json(raw: dict) -> Evaluation:
    scores = tuple(
        PrincipleScore(
            principle=PrincipleId(item["principle"]),
            score=float(item["score"]),
            evidence=tuple(_evidence_from_json(e) for e in item["evidence"]),
            rationale=item["rationale"],
        )
        for item in raw["scores"]
    )
    return Evaluation(
        principle_scores=scores,
        total=float(raw["total"]),
        band=Band(raw["band"]),
        below_threshold=raw["below_threshold"],
        archetype=Archetype(raw["archetype"]),
        variant=Variant(raw["variant"]),
    )


def _redirect_from_json(raw: dict) -> RedirectSummary:
    return RedirectSummary(
        status=ResolutionStatus(raw["status"]),
        failure_detail=raw["failure_detail"],
        resolved_path=raw["resolved_path"],
        chain=tuple(
            (link["source"], link["target"], link["kind"]) for link in raw["chain"]
        ),
    )


def _entry_from_json(raw: dict) -> ReportEntry:
    return ReportEntry(
        path=raw["path"],
        inclusion=Inclusion(raw["inclusion"]) if raw["inclusion"] else None,
        last_modified=date.fromisoformat(raw["last_modified"])
        if raw["last_modified"] else None,
        origin=raw["origin"],
        is_hybrid=raw["is_hybrid"],
        error=raw["error"],
        redirect=_redirect_from_json(raw["redirect"]) if raw["redirect"] else None,
        standalone=_evaluation_from_json(raw["standalone"])
        if raw["standalone"] else None,
        resolved=_evaluation_from_json(raw["resolved"]) if raw["resolved"] else None,
    )


def _stats_from_json(raw: dict) -> EvaluatorStats:
    return EvaluatorStats(
        name=raw["name"],
        files=raw["files"],
        mean_total=raw["mean_total"],
        median_total=raw["median_total"],
        fraction_below=raw["fraction_below"],
        warnings=tuple(raw["warnings"]),
    )


def _convergence_from_json(raw: dict) -> Convergence:
    return Convergence(
        rank_agreement=tuple(
            RankAgreement(item["panel_a"], item["panel_b"], item["kendall_tau"])
            for item in raw["rank_agreement"]
        ),
        hotspots=tuple(
            Hotspot(
                path=item["path"],
                principle=PrincipleId(item["principle"]),
                scores=tuple((s["evaluator"], s["score"]) for s in item["scores"]),
            )
            for item in raw["hotspots"]
        ),
    )


def parse_structured(data: bytes | str) -> tuple[CorpusReport, dict]:
    """Rebuild (report, config) from emit_structured output."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    payload = json.loads(data)
    agg = payload["aggregates"]
    report = CorpusReport(
        threshold=agg["threshold"],
        entries=tuple(_entry_from_json(e) for e in payload["entries"]),
        evaluated_files=agg["evaluated_files"],
        principle_means=agg["principle_means"],
        mean_total=agg["mean_total"],
        median_total=agg["median_total"],
        fraction_below_threshold_files=agg["fraction_below_threshold_files"],
        fraction_below_threshold_pairs=agg["fraction_below_threshold_pairs"],
        archetype_counts=agg["archetype_counts"],
        inclusion_counts=agg["inclusion_counts"],
        panels=tuple(_stats_from_json(s) for s in payload["panels"]),
        panel_overall=_stats_from_json(agg["panel_overall"])
        if agg["panel_overall"] else None,
        convergence=_convergence_from_json(agg["convergence"])
        if agg["convergence"] else None,
    )
    return report, payload["config"]


# ---------------------------------------------------------------------------
# SARIF

def _sarif_results_for(entry: ReportEntry) -> list[dict]:
    if entry.standalone is None:
        return []
    results = []
    for ps in entry.standalone.principle_scores:
        if ps.score >= 1.0:
            continue
        level = "error" if ps.score == 0.0 else "warning"
        title = PRINCIPLE_TITLES[ps.principle]
        state = "absent" if ps.score == 0.0 else "partially covered"
        message = (
            f"{title} is {state} in this governance file "
            f"(score {ps.score:.1f}): {ps.rationale}"
        )
        start_line = ps.evidence[0].line if ps.evidence else 1
        results.append({
            "ruleId": ps.principle.value,
            "level": level,
            "message": {"text": message},
            "locations": [{
                "physicalLocation": {
                    "artifactLocation": {"uri": entry.path},
                    "region": {"startLine": start_line},
                },
            }],
        })
    return results


def emit_sarif(report: CorpusReport) -> bytes:
    rules = [
        {
            "id": p.value,
            "name": PRINCIPLE_TITLES[p].replace(" ", ""),
            "shortDescription": {"text": PRINCIPLE_TITLES[p]},
        }
        for p in PrincipleId
    ]
    results: list[dict] = []
    for entry in report.entries:
        results.extend(_sarif_results_for(entry))
    payload = {
        "$schema": _SARIF_SCHEMA,
        "version": SARIF_VERSION,
        "runs": [{
            "tool": {"driver": {
                "name": TOOL_NAME,
                "version": TOOL_VERSION,
                "rules": rules,
            }},
            "results": results,
        }],
    }
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# text

def _fmt(value: float | None, digits: int = 2) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _short_quote(quote: str, limit: int = 58) -> str:
    flat = " ".join(quote.split())
    if len(flat) > limit:
        flat = flat[:limit - 3] + "..."
    return flat


def render_entry_text(entry: ReportEntry, threshold: float) -> str:
    lines = [entry.path]
    if entry.error is not None:
        lines.append(f"  error: {entry.error}")
        return "\n".join(lines) + "\n"
    if entry.inclusion is not None:
        lines.append(f"  inclusion: {entry.inclusion.value}")
    for ev, label in ((entry.standalone, "standalone"), (entry.resolved, "resolved")):
        if ev is None:
            continue
        if label == "resolved":
            where = entry.redirect.resolved_path if entry.redirect else "?"
            lines.append(f"  resolved target: {where}")
        for ps in ev.principle_scores:
            title = PRINCIPLE_TITLES[ps.principle]
            lines.append(
                f"  {ps.principle.value}  {title:<19} {ps.score:.1f}  {ps.rationale}"
            )
            for item in ps.evidence[:4]:
                lines.append(f"        L{item.line}: \"{_short_quote(item.quote)}\"")
        flag = "yes" if ev.below_threshold else "no"
        lines.append(
            f"  [{label}] total {ev.total:.1f}/5.0  band: {ev.band.value}  "
            f"below {threshold:g}: {flag}"
        )
    if entry.standalone is not None:
        extras = [f"archetype: {entry.standalone.archetype.value}"]
        if entry.redirect is not None:
            extras.append(f"redirect: {entry.redirect.status.value}")
            if entry.redirect.failure_detail:
                extras.append(f"detail: {entry.redirect.failure_detail}")
        elif entry.inclusion is Inclusion.INCLUDED_AS_POINTER:
            extras.append("pointer file (not resolved)")
        if entry.is_hybrid:
            extras.append("hybrid: substantive file with redirect refs")
        lines.append("  " + "  ".join(extras))
    return "\n".join(lines) + "\n"


def render_corpus_text(report: CorpusReport) -> str:
    out: list[str] = []
    n_entries = len(report.entries)
    n_errors = sum(1 for e in report.entries if e.error is not None)
    out.append(
        f"Corpus report: {n_entries} files, {report.evaluated_files} evaluated, "
        f"{n_errors} unreadable"
    )
    out.append("")
    out.append("Inclusion:")
    for name, count in report.inclusion_counts.items():
        if count:
            out.append(f"  {name:<22} {count}")
    if report.principle_means is not None:
        out.append("")
        out.append("Principle ranking (mean score, descending):")
        ranked = sorted(report.principle_means.items(),
                        key=lambda kv: (-kv[1], kv[0]))
        for rank, (principle, mean) in enumerate(ranked, start=1):
            title = PRINCIPLE_TITLES[PrincipleId(principle)]
            out.append(f"  {rank}. {principle} {title:<19} {mean:.2f}")
        out.append("")
        below = report.fraction_below_threshold_files
        out.append(
            f"Totals: mean {_fmt(report.mean_total)}  "
            f"median {_fmt(report.median_total)}  "
            f"below {report.threshold:g}: {below * 100:.1f}% of files"
        )
        out.append("")
        out.append("Archetypes:")
        for name, count in report.archetype_counts.items():
            if count:
                out.append(f"  {name:<24} {count}")
    if report.panels:
        out.append("")
        out.append("Evaluator panels:")
        header = f"  {'metric':<14}" + "".join(
            f"{s.name:>12}" for s in report.panels)
        if report.panel_overall is not None:
            header += f"{'overall':>12}"
        out.append(header)
        rows = [
            ("files", lambda s: str(s.files)),
            ("mean total", lambda s: _fmt(s.mean_total)),
            ("median total", lambda s: _fmt(s.median_total)),
            ("below thresh", lambda s: "-" if s.fraction_below is None
             else f"{s.fraction_below * 100:.0f}%"),
        ]
        for label, getter in rows:
            row = f"  {label:<14}" + "".join(
                f"{getter(s):>12}" for s in report.panels)
            if report.panel_overall is not None:
                row += f"{getter(report.panel_overall):>12}"
            out.append(row)
        for stats in report.panels:
            for warning in stats.warnings:
                out.append(f"  warning: {warning}")
    if report.convergence is not None:
        out.append("")
        out.append("Convergence:")
        for ra in report.convergence.rank_agreement:
            tau = "-" if ra.kendall_tau is None else f"{ra.kendall_tau:.2f}"
            out.append(f"  kendall tau ({ra.panel_a}, {ra.panel_b}) = {tau}")
        if report.convergence.hotspots:
            out.append("  disagreement hotspots (full 0/1 split):")
            for h in report.convergence.hotspots:
                scores = ", ".join(f"{name}={value:.1f}" for name, value in h.scores)
                out.append(f"    {h.path} {h.principle.value}: {scores}")
    out.append("")
    return "\n".join(out)


def render_report_text(report: CorpusReport, detail: bool = False) -> str:
    """Corpus summary, optionally preceded by per-file detail blocks."""
    parts: list[str] = []
    if detail:
        for entry in report.entries:
            parts.append(render_entry_text(entry, report.threshold))
        parts.append("")
    parts.append(render_corpus_text(report))
    return "\n".join(parts)
