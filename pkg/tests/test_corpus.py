from __future__ import annotations

from datetime import date

import pytest

from agentlint.corpus import (
    EvaluatorScoreSet,
    Inclusion,
    InsufficientPanels,
    PanelFormatError,
    apply_filters,
    compute_convergence,
    evaluate_corpus,
    ingest_panels,
    kendall_tau_b,
    load_panel,
    near_duplicate,
    shingle_similarity,
)
from agentlint.document import parse
from agentlint.resolver import MappingFetcher
from agentlint.scoring import Archetype

from fixture_texts import (
    ALL_PRESENT,
    P1_PRESENT,
    P2_PRESENT,
    P3_PRESENT,
    P4_PRESENT,
)

def body(salt, *texts):
    # pad synthetic corpus files past the ten-substantive-line floor; the
    # salt keeps filler vocabularies disjoint so files never read as near
    # duplicates of each other
    filler = "\n".join(f"Background {salt}{i} material {salt}note{i} entry." for i in range(12))
    return "\n\n".join(list(texts) + [filler])


class TestApplyFilters:
    def test_short_file_excluded(self):
        entries = apply_filters([("a.md", "one line\n" * 8, None)])
        assert entries[0].inclusion is Inclusion.EXCLUDED_TOO_SHORT

    def test_pointer_exception_beats_length(self):
        entries = apply_filters([("a.md", "# Agents\nSee CLAUDE.md.\n", None)])
        assert entries[0].inclusion is Inclusion.INCLUDED_AS_POINTER

    def test_long_file_included(self):
        entries = apply_filters([("a.md", body("inc", ALL_PRESENT), None)])
        assert entries[0].inclusion is Inclusion.INCLUDED

    def test_identical_files_deduplicated(self):
        text = body("dup", ALL_PRESENT)
        entries = apply_filters([("b.md", text, None), ("a.md", text, None)])
        by_path = {e.path: e.inclusion for e in entries}
        assert by_path["a.md"] is Inclusion.INCLUDED
        assert by_path["b.md"] is Inclusion.EXCLUDED_DUPLICATE

    def test_duplicate_survivor_is_order_independent(self):
        text = body("ord", ALL_PRESENT)
        forward = apply_filters([("a.md", text, None), ("b.md", text, None)])
        backward = apply_filters([("b.md", text, None), ("a.md", text, None)])
        assert forward == backward

    def test_stale_file_excluded(self):
        entries = apply_filters(
            [("a.md", body("old", ALL_PRESENT), {"last_modified": "2025-12-01"})],
            reference_date=date(2026, 8, 1),
        )
        assert entries[0].inclusion is Inclusion.EXCLUDED_INACTIVE

    def test_file_on_cutoff_day_kept(self):
        entries = apply_filters(
            [("a.md", body("cut", ALL_PRESENT), {"last_modified": "2026-02-01"})],
            reference_date=date(2026, 8, 1),
        )
        assert entries[0].inclusion is Inclusion.INCLUDED

    def test_missing_metadata_skips_recency_rule(self):
        entries = apply_filters(
            [("a.md", body("rec", ALL_PRESENT), None)], reference_date=date(2026, 8, 1))
        assert entries[0].inclusion is Inclusion.INCLUDED

    def test_generated_file_excluded(self):
        text = body("gen", ALL_PRESENT) + "\n<!-- generated by make-agents v2 -->\n"
        entries = apply_filters([("a.md", text, None)])
        assert entries[0].inclusion is Inclusion.EXCLUDED_GENERATED

    def test_output_sorted_by_path(self):
        entries = apply_filters([
            ("c.md", body("srt", ALL_PRESENT), None),
            ("a.md", "short", None),
            ("b.md", "# Agents\nSee CLAUDE.md.\n", None),
        ])
        assert [e.path for e in entries] == ["a.md", "b.md", "c.md"]


class TestNearDuplicate:
    def test_identical_texts(self):
        a = parse(body("same", ALL_PRESENT))
        b = parse(body("same", ALL_PRESENT))
        assert near_duplicate(a, b)
        assert shingle_similarity(a, b) == 1.0

    def test_disjoint_vocabulary(self):
        a = parse("alpha beta gamma delta epsilon zeta eta theta")
        b = parse("one two three four five six seven eight")
        assert shingle_similarity(a, b) == 0.0
        assert not near_duplicate(a, b)

    def test_one_appended_sentence_out_of_twenty(self):
        base_lines = [
            f"Sentence {i} covers policy topic {i} in standard wording." for i in range(20)
        ]
        a = parse("\n".join(base_lines))
        b = parse("\n".join(base_lines + ["One extra closing remark appears here."]))
        sim = shingle_similarity(a, b)
        assert sim >= 0.9
        assert near_duplicate(a, b)
        # brute-force the same Jaccard from raw 5-gram shingles
        def shingles(lines):
            words = " ".join(lines).lower().split()
            return {tuple(words[i:i + 5]) for i in range(len(words) - 4)}
        sa, sb = shingles(base_lines), shingles(
            base_lines + ["One extra closing remark appears here."])
        assert sim == len(sa & sb) / len(sa | sb)

    def test_reflexive(self):
        doc = parse(body("refl", ALL_PRESENT))
        assert near_duplicate(doc, doc)

    def test_symmetric(self):
        a = parse(body("sym", P1_PRESENT, P2_PRESENT))
        b = parse(body("sym", P1_PRESENT, P3_PRESENT))
        assert near_duplicate(a, b) == near_duplicate(b, a)
        assert shingle_similarity(a, b) == shingle_similarity(b, a)

    def test_both_empty_are_duplicates(self):
        assert shingle_similarity(parse(""), parse("")) == 1.0
        assert near_duplicate(parse(""), parse(""))

    def test_boilerplate_only_difference_ignored(self):
        a = parse(body("boil", ALL_PRESENT))
        b = parse("# Big Heading\n" + body("boil", ALL_PRESENT) + "\n---\n")
        assert shingle_similarity(a, b) == 1.0


def run_corpus(files, rules, **kwargs):
    entries = apply_filters(files)
    return evaluate_corpus(entries, rules, fetcher=MappingFetcher({}), **kwargs)


class TestEvaluateCorpus:
    def test_p4_principle_mean(self, rules):
        files = [
            ("p4-full.md", body("p4f", P4_PRESENT), None),
            ("p4-half.md", body("p4h", "Use both the code and the docs as input."), None),
            ("p4-none.md", body("p4n", "Nothing about data here."), None),
        ]
        report = run_corpus(files, rules)
        assert report.principle_means["P4"] == pytest.approx(0.5)

    def test_single_maximal_file(self, rules):
        report = run_corpus([("max.md", body("max", ALL_PRESENT), None)], rules)
        assert report.evaluated_files == 1
        assert report.mean_total == 5.0
        assert report.fraction_below_threshold_files == 0.0
        assert report.archetype_counts["complete-specification"] == 1

    def test_four_file_aggregate(self, rules):
        files = [
            ("t20a.md", body("t20a", P1_PRESENT, P2_PRESENT), None),
            ("t20b.md", body("t20b", P3_PRESENT, P2_PRESENT), None),
            ("t30.md", body("t30", P1_PRESENT, P2_PRESENT, P3_PRESENT), None),
            ("t40.md", body("t40", P1_PRESENT, P2_PRESENT, P3_PRESENT, P4_PRESENT), None),
        ]
        report = run_corpus(files, rules)
        totals = sorted(e.standalone.total for e in report.entries)
        assert totals == [2.0, 2.0, 3.0, 4.0]
        assert report.fraction_below_threshold_files == 0.5
        assert report.median_total == 2.5
        assert report.mean_total == pytest.approx(2.75)

    def test_excluded_files_not_evaluated(self, rules):
        files = [
            ("keep.md", body("keep", ALL_PRESENT), None),
            ("skip.md", "too short", None),
        ]
        report = run_corpus(files, rules)
        skip = next(e for e in report.entries if e.path == "skip.md")
        assert skip.standalone is None
        assert report.evaluated_files == 1
        assert report.inclusion_counts["excluded-too-short"] == 1

    def test_entry_order_is_path_order(self, rules):
        files = [
            ("z.md", body("zz", ALL_PRESENT), None),
            ("a.md", body("aa", P1_PRESENT, P2_PRESENT), None),
        ]
        report = run_corpus(files, rules)
        assert [e.path for e in report.entries] == ["a.md", "z.md"]

    def test_input_order_does_not_change_report(self, rules):
        files = [
            ("a.md", body("ia", ALL_PRESENT), None),
            ("b.md", body("ib", P1_PRESENT, P2_PRESENT), None),
            ("c.md", "# Agents\nSee CLAUDE.md.\n", None),
        ]
        fetcher = MappingFetcher({})
        forward = evaluate_corpus(apply_filters(files), rules, fetcher=fetcher)
        backward = evaluate_corpus(apply_filters(files[::-1]), rules, fetcher=fetcher)
        assert forward == backward

    def test_pointer_dual_scoring(self, rules):
        files = [("pointer.md", "See CLAUDE.md for everything.", None)]
        fetcher = MappingFetcher({"/repo/CLAUDE.md": ALL_PRESENT})
        entries = apply_filters([("/repo/pointer.md", files[0][1], None)])
        report = evaluate_corpus(entries, rules, fetcher=fetcher)
        entry = report.entries[0]
        assert entry.standalone.total == 0.0
        assert entry.standalone.archetype is Archetype.MINIMAL_POINTER
        assert entry.resolved is not None
        assert entry.resolved.total == 5.0
        assert entry.redirect.resolved_path == "/repo/CLAUDE.md"
        # the standalone evaluation feeds the aggregates, not the resolved one
        assert report.mean_total == 0.0

    def test_broken_pointer(self, rules):
        entries = apply_filters([("/repo/pointer.md", "See CLAUDE.md.", None)])
        report = evaluate_corpus(entries, rules, fetcher=MappingFetcher({}))
        entry = report.entries[0]
        assert entry.standalone.archetype is Archetype.BROKEN_REFERENCE
        assert entry.resolved is None

    def test_no_resolve_leaves_pointer_unclassified(self, rules):
        entries = apply_filters([("/repo/pointer.md", "See CLAUDE.md.", None)])
        report = evaluate_corpus(entries, rules, resolve_redirects=False)
        entry = report.entries[0]
        assert entry.standalone.archetype is Archetype.UNCLASSIFIED
        assert entry.redirect is None

    def test_hybrid_flag(self, rules):
        text = body("hyb", ALL_PRESENT) + "\nSee CLAUDE.md for history.\n"
        entries = apply_filters([("/repo/hybrid.md", text, None)])
        report = evaluate_corpus(
            entries, rules,
            fetcher=MappingFetcher({"/repo/CLAUDE.md": ALL_PRESENT}))
        assert report.entries[0].is_hybrid

    def test_read_errors_reported_not_fatal(self, rules):
        entries = apply_filters([("a.md", body("err", ALL_PRESENT), None)])
        report = evaluate_corpus(
            entries, rules, fetcher=MappingFetcher({}),
            errors=[("broken.md", "permission denied")])
        errored = next(e for e in report.entries if e.path == "broken.md")
        assert errored.error == "permission denied"
        assert errored.standalone is None
        assert report.evaluated_files == 1


def distinct_corpus(n):
    # n included files with fully disjoint vocabularies
    files = []
    for i in range(n):
        lines = [f"f{i}w{i}x{j} y{i}z{j} guidance{i}item{j} alpha{i}beta{j}"
                 for j in range(12)]
        files.append((f"file{i:02d}.md", "\n".join(lines), None))
    return files


class TestPanels:
    def test_identity_panel_matches_report_stats(self, rules):
        files = [
            ("a.md", body("pa", ALL_PRESENT), None),
            ("b.md", body("pb", P1_PRESENT, P2_PRESENT), None),
        ]
        report = run_corpus(files, rules)
        panel = EvaluatorScoreSet("self", {
            e.path: tuple(ps.score for ps in e.standalone.principle_scores)
            for e in report.entries
        })
        updated = ingest_panels(report, [panel])
        stats = updated.panels[0]
        assert stats.files == report.evaluated_files
        assert stats.mean_total == report.mean_total
        assert stats.median_total == report.median_total
        assert stats.fraction_below == report.fraction_below_threshold_files
        assert updated.fraction_below_threshold_pairs == \
            report.fraction_below_threshold_files

    def test_38_of_102_pairs(self, rules):
        report = run_corpus(distinct_corpus(34), rules)
        assert report.evaluated_files == 34
        paths = [e.path for e in report.entries]
        panels = []
        flat = 0
        for name in ("panel-a", "panel-b", "panel-c"):
            scores = {}
            for path in paths:
                low = flat < 38
                scores[path] = (0.0,) * 5 if low else (1.0, 1.0, 1.0, 1.0, 0.5)
                flat += 1
            panels.append(EvaluatorScoreSet(name, scores))
        updated = ingest_panels(report, panels)
        assert abs(updated.fraction_below_threshold_pairs - 38 / 102) < 1e-9
        assert updated.panel_overall.files == 102

    def test_unknown_file_warning(self, rules):
        report = run_corpus([("a.md", body("uw", ALL_PRESENT), None)], rules)
        panel = EvaluatorScoreSet("ev", {
            "a.md": (1.0, 1.0, 1.0, 1.0, 1.0),
            "ghost.md": (0.0, 0.0, 0.0, 0.0, 0.0),
        })
        updated = ingest_panels(report, [panel])
        stats = updated.panels[0]
        assert stats.files == 1
        assert any("ghost.md" in w for w in stats.warnings)
        assert stats.mean_total == 5.0

    def test_invalid_scores_rejected(self, rules):
        report = run_corpus([("a.md", body("bad", ALL_PRESENT), None)], rules)
        panel = EvaluatorScoreSet("ev", {"a.md": (0.3, 0, 0, 0, 0)})
        with pytest.raises(PanelFormatError):
            ingest_panels(report, [panel])

    def test_load_panel_file(self, rules, tmp_path):
        path = tmp_path / "panel.yaml"
        path.write_text(
            "evaluator: reviewer-x\n"
            "scores:\n"
            "  a.md: [1.0, 0.5, 1.0, 0.0, 1.0]\n",
            encoding="utf-8",
        )
        panel = load_panel(path)
        assert panel.name == "reviewer-x"
        assert panel.scores["a.md"] == (1.0, 0.5, 1.0, 0.0, 1.0)

    def test_load_panel_rejects_wrong_arity(self, tmp_path):
        path = tmp_path / "panel.yaml"
        path.write_text("evaluator: e\nscores:\n  a.md: [1.0, 0.5]\n", encoding="utf-8")
        with pytest.raises(PanelFormatError):
            load_panel(path)


class TestKendallTau:
    def test_identical_rankings(self):
        assert kendall_tau_b([1, 2, 3, 4, 5], [10, 20, 30, 40, 50]) == 1.0

    def test_reversed_rankings(self):
        assert kendall_tau_b([1, 2, 3, 4, 5], [50, 40, 30, 20, 10]) == -1.0

    def test_undefined_when_constant(self):
        assert kendall_tau_b([1, 1, 1], [1, 2, 3]) is None

    def test_too_short(self):
        assert kendall_tau_b([1], [2]) is None

    def test_matches_reference_implementation(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        import random

        rng = random.Random(7)
        for _ in range(50):
            n = rng.randint(2, 12)
            xs = [rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(n)]
            ys = [rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(n)]
            ours = kendall_tau_b(xs, ys)
            theirs = scipy_stats.kendalltau(xs, ys, variant="b").statistic
            if ours is None:
                assert theirs != theirs  # reference yields NaN when undefined
            else:
                assert ours == pytest.approx(theirs, abs=1e-12)


class TestConvergence:
    def _panels(self, mapping_a, mapping_b):
        return [EvaluatorScoreSet("a", mapping_a), EvaluatorScoreSet("b", mapping_b)]

    def test_identical_panels_agree(self):
        scores = {"x.md": (1.0, 0.5, 1.0, 0.0, 0.5), "y.md": (0.5, 0.0, 1.0, 0.0, 1.0)}
        conv = compute_convergence(self._panels(scores, dict(scores)))
        assert all(r.kendall_tau == 1.0 for r in conv.rank_agreement)
        assert conv.hotspots == ()

    def test_reversed_rank_order(self):
        a = {"x.md": (1.0, 0.5, 0.5, 0.0, 0.0), "y.md": (1.0, 1.0, 0.5, 0.5, 0.0)}
        # per-principle means of a: [1.0, 0.75, 0.5, 0.25, 0.0] strictly falling
        b = {"x.md": (0.0, 0.0, 0.5, 0.5, 1.0), "y.md": (0.0, 0.5, 0.5, 1.0, 1.0)}
        conv = compute_convergence(self._panels(a, b))
        assert conv.rank_agreement[0].kendall_tau == -1.0

    def test_hotspot_detection(self):
        a = {"x.md": (1.0, 1.0, 1.0, 0.0, 1.0)}
        b = {"x.md": (1.0, 1.0, 1.0, 1.0, 1.0)}
        conv = compute_convergence(self._panels(a, b))
        assert len(conv.hotspots) == 1
        hotspot = conv.hotspots[0]
        assert hotspot.path == "x.md"
        assert hotspot.principle.value == "P4"
        assert dict(hotspot.scores) == {"a": 0.0, "b": 1.0}

    def test_partial_disagreement_is_not_hotspot(self):
        a = {"x.md": (0.5, 1.0, 1.0, 0.0, 1.0)}
        b = {"x.md": (1.0, 1.0, 1.0, 0.5, 1.0)}
        conv = compute_convergence(self._panels(a, b))
        assert conv.hotspots == ()

    def test_insufficient_panels(self):
        with pytest.raises(InsufficientPanels):
            compute_convergence([EvaluatorScoreSet("only", {})])

    def test_restricted_to_shared_files(self):
        a = {"x.md": (1.0, 0.0, 1.0, 0.0, 1.0), "only-a.md": (0.0,) * 5}
        b = {"x.md": (0.0, 1.0, 1.0, 1.0, 1.0)}
        conv = compute_convergence(self._panels(a, b))
        assert all(h.path == "x.md" for h in conv.hotspots)
