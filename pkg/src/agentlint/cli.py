"""Command line interface: `agentlint lint FILE` and `agentlint corpus DIR`.

Exit codes: 0 success, 1 lint target below the completeness threshold,
2 operational error (unreadable input, bad rule file, empty corpus).
Defaults can be overridden by AGENTLINT_* environment variables
(AGENTLINT_THRESHOLD, AGENTLINT_RULES, AGENTLINT_FORMAT,
AGENTLINT_POINTER_LIMIT, AGENTLINT_DEPTH_CAP); command line flags win.
"""
from __future__ import annotations

import argparse
import os
import sys
from datetime import date
from pathlib import Path

import yaml

from .corpus import (
    CorpusEntry,
    FileMetadata,
    Inclusion,
    PanelFormatError,
    apply_filters,
    evaluate_corpus,
    ingest_panels,
    load_panel,
)
from .document import DEFAULT_GOVERNANCE_FILENAMES, is_pointer_file, parse
from .resolver import DEFAULT_DEPTH_CAP, LocalHttpFetcher
from .rules import MalformedRule, RuleSet, default_rules, load_rules
from .scoring import DEFAULT_THRESHOLD
from .output import (
    emit_sarif,
    emit_structured,
    render_entry_text,
    render_report_text,
)

EXIT_OK = 0
EXIT_BELOW_THRESHOLD = 1
EXIT_ERROR = 2

ENV_PREFIX = "AGENTLINT_"
FORMATS = ("text", "structured", "interchange")


def _env(name: str, fallback):
    return os.environ.get(ENV_PREFIX + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentlint",
        description="Score agent governance files for structural completeness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--threshold", type=float,
                       default=float(_env("THRESHOLD", DEFAULT_THRESHOLD)),
                       help="below-threshold total (default %(default)s)")
        p.add_argument("--rules", default=_env("RULES", None),
                       help="path to a custom rule set (YAML)")
        p.add_argument("--no-resolve", action="store_true",
                       help="do not follow governance redirects")
        p.add_argument("--format", choices=FORMATS,
                       default=_env("FORMAT", "text"),
                       help="output format (default %(default)s)")
        p.add_argument("--pointer-limit", type=int,
                       default=int(_env("POINTER_LIMIT", 10)),
                       help="max substantive lines for a pointer file")
        p.add_argument("--depth-cap", type=int,
                       default=int(_env("DEPTH_CAP", DEFAULT_DEPTH_CAP)),
                       help="max redirect chain length")

    lint = sub.add_parser("lint", help="score a single governance file")
    lint.add_argument("path")
    common(lint)

    corpus = sub.add_parser("corpus", help="score a directory or manifest of files")
    corpus.add_argument("target")
    common(corpus)
    corpus.add_argument("--panel", action="append", default=[],
                        help="evaluator score file (repeatable)")
    corpus.add_argument("--reference-date", type=date.fromisoformat, default=None,
                        help="ISO date anchoring the six-month recency filter")

    return parser


def _load_rule_set(path: str | None) -> RuleSet:
    return load_rules(path) if path else default_rules()


def _config_dict(args: argparse.Namespace, command: str) -> dict:
    config = {
        "command": command,
        "threshold": args.threshold,
        "rules": args.rules,
        "resolve": not args.no_resolve,
        "format": args.format,
        "pointer_line_limit": args.pointer_limit,
        "depth_cap": args.depth_cap,
    }
    if command == "corpus":
        config["reference_date"] = (
            args.reference_date.isoformat() if args.reference_date else None
        )
        config["panels"] = list(args.panel)
    return config


def _emit(report, config: dict, fmt: str, detail: bool) -> None:
    if fmt == "structured":
        sys.stdout.buffer.write(emit_structured(report, config))
    elif fmt == "interchange":
        sys.stdout.buffer.write(emit_sarif(report))
    else:
        sys.stdout.write(render_report_text(report, detail=detail))
    sys.stdout.flush()


def cmd_lint(args: argparse.Namespace) -> int:
    try:
        rules = _load_rule_set(args.rules)
    except (MalformedRule, OSError) as exc:
        print(f"agentlint: {exc}", file=sys.stderr)
        return EXIT_ERROR
    path = Path(args.path)
    try:
        raw = path.read_bytes().decode("utf-8", errors="replace")
    except OSError as exc:
        print(f"agentlint: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    names = rules.redirect_filenames or DEFAULT_GOVERNANCE_FILENAMES
    doc = parse(raw, source_path=str(path), governance_filenames=names)
    inclusion = (Inclusion.INCLUDED_AS_POINTER
                 if is_pointer_file(doc, args.pointer_limit)
                 else Inclusion.INCLUDED)
    entry = CorpusEntry(str(path), FileMetadata(), doc, inclusion)
    try:
        report = evaluate_corpus(
            [entry], rules,
            threshold=args.threshold,
            resolve_redirects=not args.no_resolve,
            fetcher=LocalHttpFetcher(),
            depth_cap=args.depth_cap,
            pointer_line_limit=args.pointer_limit,
            governance_filenames=names,
        )
    except ValueError as exc:
        print(f"agentlint: {exc}", file=sys.stderr)
        return EXIT_ERROR
    config = _config_dict(args, "lint")
    if args.format == "text":
        sys.stdout.write(render_entry_text(report.entries[0], args.threshold))
        sys.stdout.flush()
    else:
        _emit(report, config, args.format, detail=False)

    result = report.entries[0]
    gate_total = result.standalone.total
    if result.resolved is not None:
        gate_total = max(gate_total, result.resolved.total)
    return EXIT_BELOW_THRESHOLD if gate_total < args.threshold else EXIT_OK


def _load_manifest(path: Path) -> list[tuple[str, Path, dict]]:
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValueError(f"unparseable manifest {path}: {exc}") from exc
    if isinstance(data, dict) and "files" in data:
        data = data["files"]
    if not isinstance(data, list):
        raise ValueError(f"{path}: manifest must be a list of files")
    base = path.parent
    out: list[tuple[str, Path, dict]] = []
    for item in data:
        if isinstance(item, str):
            out.append((item, base / item, {}))
        elif isinstance(item, dict) and "path" in item:
            meta = {k: item.get(k) for k in ("last_modified", "origin")
                    if item.get(k) is not None}
            out.append((str(item["path"]), base / str(item["path"]), meta))
        else:
            raise ValueError(f"{path}: bad manifest entry {item!r}")
    return out


def _collect_corpus(target: Path) -> list[tuple[str, Path, dict]]:
    if target.is_dir():
        found = sorted(p for p in target.rglob("*.md") if p.is_file())
        return [(str(p), p, {}) for p in found]
    if target.is_file():
        return _load_manifest(target)
    raise FileNotFoundError(f"no such file or directory: {target}")


def cmd_corpus(args: argparse.Namespace) -> int:
    try:
        rules = _load_rule_set(args.rules)
        sources = _collect_corpus(Path(args.target))
        panels = [load_panel(p) for p in args.panel]
    except (MalformedRule, PanelFormatError, ValueError, OSError) as exc:
        print(f"agentlint: {exc}", file=sys.stderr)
        return EXIT_ERROR

    names = rules.redirect_filenames or DEFAULT_GOVERNANCE_FILENAMES
    files: list[tuple[str, str, dict]] = []
    errors: list[tuple[str, str]] = []
    for label, read_path, meta in sources:
        try:
            files.append((label, read_path.read_bytes().decode("utf-8", errors="replace"), meta))
        except OSError as exc:
            errors.append((label, str(exc)))

    try:
        entries = apply_filters(
            files,
            reference_date=args.reference_date,
            pointer_line_limit=args.pointer_limit,
            governance_filenames=names,
        )
        report = evaluate_corpus(
            entries, rules,
            threshold=args.threshold,
            resolve_redirects=not args.no_resolve,
            fetcher=LocalHttpFetcher(),
            depth_cap=args.depth_cap,
            pointer_line_limit=args.pointer_limit,
            governance_filenames=names,
            errors=errors,
        )
        if panels:
            report = ingest_panels(report, panels)
    except (PanelFormatError, ValueError) as exc:
        print(f"agentlint: {exc}", file=sys.stderr)
        return EXIT_ERROR

    _emit(report, _config_dict(args, "corpus"), args.format, detail=False)
    if not files:
        print("agentlint: no readable corpus files", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValueError as exc:
        print(f"agentlint: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "lint":
        return cmd_lint(args)
    return cmd_corpus(args)


if __name__ == "__main__":
    raise SystemExit(main())
