import itertools
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from litsynth.corpus import Passage
from litsynth.errors import ContractViolation
from litsynth.rerank import (
    RankedPassage,
    blend_citation_prior,
    meta_filter,
    rank_passages,
    score_pairs,
    select_top_n,
)
from litsynth.stubs import TokenOverlapReranker


def passage(pid, paper, text="text"):
    return Passage(passage_id=pid, paper_id=paper, chunk_index=0, text=text, word_count=1)


def ranked(pid, paper, final, score=None, citations=0):
    return RankedPassage(
        passage=passage(pid, paper),
        rerank_score=score if score is not None else final,
        citation_count=citations,
        final_score=final,
    )


class TestScorePairs:
    def test_empty(self):
        assert score_pairs("q", [], TokenOverlapReranker()) == []

    def test_overlap_orders_relevance(self):
        passages = [
            passage("a:0", "a", "cavity cooling of nanoparticles"),
            passage("b:0", "b", "job shop scheduling"),
        ]
        scores = score_pairs("cavity cooling", passages, TokenOverlapReranker())
        assert scores[0] > scores[1]

    def test_same_passage_equal_scores(self):
        passages = [passage("a:0", "a", "same words"), passage("b:0", "b", "same words")]
        scores = score_pairs("same words", passages, TokenOverlapReranker())
        assert scores[0] == scores[1]

    def test_misaligned_provider_raises(self):
        class Broken:
            def score(self, query, passages):
                return [0.1]

        with pytest.raises(ContractViolation):
            score_pairs("q", [passage("a:0", "a"), passage("b:0", "b")], Broken())


class TestBlend:
    def test_zero_citations_identity(self):
        assert blend_citation_prior(0.42, 0, 123) == 0.42

    def test_pool_max_adds_exactly_lambda(self):
        assert blend_citation_prior(0.42, 55, 55, 0.1) == 0.42 + 0.1

    def test_hand_computed_log_ratio(self):
        # 0.8 + 0.1 * ln(10)/ln(100) = 0.8 + 0.1 * 0.5
        assert blend_citation_prior(0.8, 9, 99, 0.1) == pytest.approx(0.85, abs=1e-12)

    def test_zero_max_means_no_prior(self):
        assert blend_citation_prior(0.3, 0, 0) == 0.3

    def test_lambda_zero_is_identity(self):
        for c in (0, 3, 99):
            assert blend_citation_prior(0.7, c, 99, 0.0) == 0.7

    def test_monotone_in_citation_count(self):
        values = [blend_citation_prior(0.0, c, 100) for c in range(0, 101, 7)]
        assert values == sorted(values)

    def test_precondition_violations(self):
        with pytest.raises(ValueError):
            blend_citation_prior(0.0, -1, 5)
        with pytest.raises(ValueError):
            blend_citation_prior(0.0, 6, 5)

    def test_endpoints_invariant_under_scaling(self):
        # the prior stays 0 at c=0 and exactly lambda at the pool max for any scale
        for scale in (1, 10, 1000):
            assert blend_citation_prior(0.0, 0, 50 * scale) == 0.0
            assert blend_citation_prior(0.0, 50 * scale, 50 * scale, 0.2) == pytest.approx(0.2)

    def test_blend_term_ordering_preserved_under_scaling(self):
        counts = [0, 3, 17, 50]
        base = [blend_citation_prior(0.0, c, 50) for c in counts]
        scaled = [blend_citation_prior(0.0, c * 20, 1000) for c in counts]
        assert sorted(range(4), key=base.__getitem__) == sorted(range(4), key=scaled.__getitem__)


class TestMetaFilter:
    def test_caps_single_paper_at_three(self):
        items = [ranked(f"A:{i}", "A", 1.0 - 0.1 * i) for i in range(5)]
        kept = meta_filter(items)
        assert [r.passage.passage_id for r in kept] == ["A:0", "A:1", "A:2"]

    def test_distinct_papers_unchanged(self):
        items = [ranked(f"P{i}:0", f"P{i}", 1.0 - 0.1 * i) for i in range(4)]
        assert meta_filter(items) == items

    def test_empty(self):
        assert meta_filter([]) == []

    def test_idempotent_and_subsequence(self):
        items = [ranked(f"{p}:{i}", p, 10 - i - ord(p[0]) * 0.01) for p in "ABC" for i in range(4)]
        items.sort(key=lambda r: -r.final_score)
        once = meta_filter(items, per_paper_cap=2)
        assert meta_filter(once, per_paper_cap=2) == once
        it = iter(items)
        assert all(any(k is x for x in it) for k in once)  # subsequence check
        assert all(c <= 2 for c in Counter(r.passage.paper_id for r in once).values())


class TestSelectTopN:
    def test_first_ten_of_thirty(self):
        items = [ranked(f"P{i}:0", f"P{i}", 30 - i) for i in range(30)]
        assert select_top_n(items, 10) == items[:10]

    def test_short_input(self):
        items = [ranked(f"P{i}:0", f"P{i}", 3 - i) for i in range(3)]
        assert select_top_n(items, 10) == items

    def test_zero(self):
        assert select_top_n([ranked("a:0", "a", 1.0)], 0) == []

    def test_negative_raises(self):
        with pytest.raises(ContractViolation):
            select_top_n([], -1)


def enumeration_oracle(items, cap, n):
    """Best-scoring subset with <= cap per paper and size <= n, by brute force."""
    best_ids, best_total = [], -1.0
    indices = range(len(items))
    for size in range(0, min(n, len(items)) + 1):
        for combo in itertools.combinations(indices, size):
            counts = Counter(items[i].passage.paper_id for i in combo)
            if any(v > cap for v in counts.values()):
                continue
            total = sum(items[i].final_score for i in combo)
            if total > best_total:
                best_total = total
                best_ids = [items[i].passage.passage_id for i in combo]
    return best_ids


def pipeline_select(items, cap, n):
    ordered = sorted(items, key=lambda r: (-r.final_score, r.passage.passage_id))
    return [r.passage.passage_id for r in select_top_n(meta_filter(ordered, cap), n)]


def small_instances(max_size):
    """All paper assignments for pools of up to ``max_size`` passages over 3 papers."""
    for size in range(0, max_size + 1):
        for assignment in itertools.product(range(3), repeat=size):
            yield size, assignment


@pytest.mark.parametrize("cap,n", [(3, 5), (2, 4)])
def test_exhaustive_small_instances_match_oracle(cap, n):
    checked = 0
    for size, assignment in small_instances(6):
        items = [
            ranked(f"q{i:02d}:0", f"paper{paper}", final=1.0 + (size - i) * 0.37 + i * 0.011)
            for i, paper in enumerate(assignment)
        ]
        assert pipeline_select(items, cap, n) == sorted(
            enumeration_oracle(items, cap, n),
            key=lambda pid: -next(r.final_score for r in items if r.passage.passage_id == pid),
        )
        checked += 1
    assert checked > 1000


class TestRankPassages:
    def test_full_pipeline_blend_then_cap_then_select(self):
        passages = [
            passage("hot:0", "hot", "exact query match text"),
            passage("hot:1", "hot", "exact query match text"),
            passage("hot:2", "hot", "exact query match text"),
            passage("hot:3", "hot", "exact query match text"),
            passage("cold:0", "cold", "unrelated words entirely"),
        ]
        result = rank_passages(
            "exact query match text",
            passages,
            TokenOverlapReranker(),
            citation_counts={"hot": 10, "cold": 10},
            top_n=4,
        )
        ids = [r.passage.passage_id for r in result]
        assert ids == ["hot:0", "hot:1", "hot:2", "cold:0"]  # cap 3 per paper
        assert all(r.final_score >= result[-1].final_score for r in result)

    def test_citation_prior_breaks_rerank_tie(self):
        passages = [
            passage("low:0", "low", "same text"),
            passage("high:0", "high", "same text"),
        ]
        result = rank_passages(
            "same text",
            passages,
            TokenOverlapReranker(),
            citation_counts={"low": 0, "high": 80},
            top_n=2,
        )
        assert [r.passage.passage_id for r in result] == ["high:0", "low:0"]
        assert result[0].final_score == pytest.approx(result[0].rerank_score + 0.1)

    def test_empty_pool(self):
        assert rank_passages("q", [], TokenOverlapReranker(), {}) == []

    def test_missing_citation_metadata_counts_zero(self):
        passages = [passage("web:x:0", "web:x", "the query words")]
        result = rank_passages(
            "the query words", passages, TokenOverlapReranker(), citation_counts={}, top_n=1
        )
        assert result[0].citation_count == 0


@settings(max_examples=60)
@given(
    scores=st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), min_size=0, max_size=8),
    papers=st.lists(st.integers(min_value=0, max_value=2), min_size=0, max_size=8),
    cap=st.integers(min_value=1, max_value=4),
    n=st.integers(min_value=0, max_value=8),
)
def test_meta_filter_select_properties(scores, papers, cap, n):
    size = min(len(scores), len(papers))
    items = [ranked(f"h{i}:0", f"P{papers[i]}", scores[i]) for i in range(size)]
    items.sort(key=lambda r: (-r.final_score, r.passage.passage_id))
    out = select_top_n(meta_filter(items, cap), n)
    assert len(out) <= n
    assert all(c <= cap for c in Counter(r.passage.paper_id for r in out).values())
    positions = [items.index(r) for r in out]
    assert positions == sorted(positions)
