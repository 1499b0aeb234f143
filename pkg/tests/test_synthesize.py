import pytest

from litsynth.corpus import Passage
from litsynth.errors import GenerationFailed, PoolEmpty, TransportError
from litsynth.rerank import RankedPassage
from litsynth.retrieval import CandidatePool
from litsynth.stubs import ScriptedChatProvider
from litsynth.synthesize import (
    Draft,
    Feedback,
    GenerationParams,
    SessionBackends,
    generate_feedback,
    generate_initial,
    incorporate_feedback,
    parse_feedback,
    resolve_markers,
    run_session,
    verify_citations,
)

PARAMS = GenerationParams()


def passage(pid, text):
    return Passage(
        passage_id=pid, paper_id=pid.split(":")[0], chunk_index=0, text=text, word_count=len(text.split())
    )


@pytest.fixture
def two_passages():
    return [
        passage("p1:0", "T1\nEvidence about sparse retrieval methods."),
        passage("p2:0", "T2\nEvidence about reranking pipelines."),
    ]


class TestResolveMarkers:
    def test_valid_markers_kept_byte_identical(self, two_passages):
        text = "X is true [1]. Y holds [1][2]."
        resolved, markers, warnings = resolve_markers(text, two_passages)
        assert resolved == text
        assert markers == {1: "p1:0", 2: "p2:0"}
        assert warnings == []

    def test_out_of_range_marker_stripped(self, two_passages):
        resolved, markers, warnings = resolve_markers("X is true [9].", two_passages)
        assert resolved == "X is true."
        assert markers == {}
        assert len(warnings) == 1

    def test_mixed_group_rewritten(self, two_passages):
        resolved, markers, _ = resolve_markers("Both appear [1, 9].", two_passages)
        assert resolved == "Both appear [1]."
        assert markers == {1: "p1:0"}

    def test_comma_group_kept(self, two_passages):
        resolved, markers, _ = resolve_markers("Pair [1, 2].", two_passages)
        assert resolved == "Pair [1, 2]."
        assert markers == {1: "p1:0", 2: "p2:0"}


class TestGenerateInitial:
    def test_marker_resolution(self, two_passages):
        lm = ScriptedChatProvider(["X is true [1]."])
        draft = generate_initial("q", two_passages, lm, PARAMS)
        assert draft.text == "X is true [1]."
        assert draft.marker_map == {1: "p1:0"}

    def test_unresolvable_marker_warning(self, two_passages):
        lm = ScriptedChatProvider(["X is true [9]."])
        draft = generate_initial("q", two_passages, lm, PARAMS)
        assert draft.text == "X is true."
        assert draft.warnings

    def test_no_markers(self, two_passages):
        draft = generate_initial("q", two_passages, ScriptedChatProvider(["Plain text."]), PARAMS)
        assert draft.marker_map == {}

    def test_empty_completion_fails(self, two_passages):
        with pytest.raises(GenerationFailed):
            generate_initial("q", two_passages, ScriptedChatProvider(["  \n"]), PARAMS)

    def test_no_passages_precondition(self):
        with pytest.raises(ValueError):
            generate_initial("q", [], ScriptedChatProvider(["x"]), PARAMS)

    def test_uses_configured_limits(self, two_passages):
        lm = ScriptedChatProvider(["ok [1]."])
        generate_initial("q", two_passages, lm, PARAMS)
        assert lm.calls[0]["temperature"] == 0.7
        assert lm.calls[0]["max_tokens"] == 3000


class TestFeedbackParsing:
    def test_five_items_truncated_to_three(self):
        completion = "\n".join(f"{i}. Item number {i}." for i in range(1, 6))
        items = parse_feedback(completion)
        assert [f.ordinal for f in items] == [1, 2, 3]

    def test_query_suffix(self):
        items = parse_feedback(
            "1. Add results on other tasks. QUERY: retrieval benchmarks beyond QA"
        )
        assert items[0].text == "Add results on other tasks."
        assert items[0].retrieval_query == "retrieval benchmarks beyond QA"

    def test_blank_output(self):
        assert parse_feedback("") == []
        assert parse_feedback("no numbered lines here") == []

    def test_feedback_generation_uses_token_limit(self, two_passages):
        lm = ScriptedChatProvider(["1. Improve the ending."])
        items = generate_feedback("q", Draft(text="draft"), lm, PARAMS)
        assert len(items) == 1
        assert lm.calls[0]["max_tokens"] == 1000


class TestIncorporate:
    def test_scripted_revision_verbatim(self, two_passages):
        lm = ScriptedChatProvider(["Revised with more detail [2]."])
        revised = incorporate_feedback(
            "q", Draft(text="old"), Feedback(1, "expand"), two_passages, lm, PARAMS
        )
        assert revised.text == "Revised with more detail [2]."
        assert revised.marker_map == {2: "p2:0"}


class TestVerify:
    def test_inserts_marker_for_uncited_statement(self, two_passages):
        draft = Draft(
            text="This sentence makes an uncited claim about retrieval that is long enough."
        )
        result = verify_citations(draft, two_passages, ScriptedChatProvider(["2"]))
        assert result.verified
        assert result.insertions == 1
        assert result.draft.text.endswith("long enough [2].")
        assert result.draft.marker_map[2] == "p2:0"

    def test_none_answer_leaves_sentence_unchanged(self, two_passages):
        text = "This sentence makes an uncited claim about retrieval that is long enough."
        result = verify_citations(Draft(text=text), two_passages, ScriptedChatProvider(["NONE"]))
        assert result.draft.text == text
        assert result.insertions == 0

    def test_fully_cited_draft_byte_identical_no_lm_calls(self, two_passages):
        text = "Everything here is already supported by the evidence we retrieved [1]."
        lm = ScriptedChatProvider([])  # would raise if called
        result = verify_citations(Draft(text=text, marker_map={1: "p1:0"}), two_passages, lm)
        assert result.draft.text == text
        assert lm.calls_made == 0

    def test_short_sentences_not_citation_worthy(self, two_passages):
        lm = ScriptedChatProvider([])
        result = verify_citations(Draft(text="Intro.\nShort header"), two_passages, lm)
        assert result.draft.text == "Intro.\nShort header"
        assert lm.calls_made == 0

    def test_transport_failure_returns_unverified(self, two_passages):
        class DownLM:
            def complete(self, messages, temperature, max_tokens):
                raise TransportError("down")

        text = "This sentence makes an uncited claim about retrieval that is long enough."
        result = verify_citations(Draft(text=text), two_passages, DownLM())
        assert not result.verified
        assert result.draft.text == text

    def test_never_deletes_sentences_or_markers(self, two_passages):
        text = (
            "First cited statement stands on solid retrieved evidence [1]. "
            "Second statement without any citation but clearly long enough to retain. "
            "Third statement also lacks support and easily passes the length rule."
        )
        result = verify_citations(
            Draft(text=text, marker_map={1: "p1:0"}), two_passages, ScriptedChatProvider(["1", "NONE"])
        )
        assert result.draft.text.count(".") == 3
        assert "[1]" in result.draft.text
        assert result.draft.marker_map[1] == "p1:0"


def make_pool(passages, query="q", provenance="dense"):
    pool = CandidatePool(query=query)
    pool.assembled = list(passages)
    pool.provenance = {p.passage_id: provenance for p in passages}
    return pool


def make_backends(lm, initial_passages, extra_passages=None):
    """Counting mock retriever/ranker pair over fixed passages."""
    calls = {"retrieve": 0, "rank": 0}
    extras = list(extra_passages or [])

    def retrieve(query):
        calls["retrieve"] += 1
        if calls["retrieve"] == 1:
            return make_pool(initial_passages, query)
        return make_pool(extras, query, provenance="web")

    def rank(query, pool):
        calls["rank"] += 1
        return [
            RankedPassage(passage=p, rerank_score=1.0, citation_count=0, final_score=1.0)
            for p in pool.assembled
        ]

    return SessionBackends(lm=lm, retrieve=retrieve, rank=rank), calls


GOLDEN_Y0 = "Initial answer citing the first source [1]. It is long enough to retain marks."
GOLDEN_FEEDBACK = (
    "1. Tighten the opening paragraph.\n"
    "2. Cover reranking evidence. QUERY: reranking pipelines"
)
GOLDEN_Y1 = "Tightened answer citing the first source [1]. It remains long enough to retain."
GOLDEN_Y2 = (
    "Final answer citing both the first source [1] and the newly retrieved evidence [3]. "
    "Every retained sentence carries its own citation marker as required [1]."
)


def golden_script():
    return ScriptedChatProvider([GOLDEN_Y0, GOLDEN_FEEDBACK, GOLDEN_Y1, GOLDEN_Y2])


@pytest.fixture
def session_fixture(two_passages):
    extra = [passage("p3:0", "T3\nNewly retrieved evidence on reranking.")]
    return two_passages, extra


class TestRunSession:
    def test_end_to_end_transcript(self, session_fixture):
        initial, extra = session_fixture
        backends, calls = make_backends(golden_script(), initial, extra)
        session = run_session("how do rerankers help?", backends)
        assert [d.text for d in session.drafts] == [GOLDEN_Y0, GOLDEN_Y1, GOLDEN_Y2]
        assert session.final.text == GOLDEN_Y2
        assert len(session.feedback) == 2
        assert session.extra_retrievals == 1
        assert calls["retrieve"] == 2  # initial + one feedback-triggered round
        assert len(session.context) == 3  # context grew strictly
        assert session.verified
        # markers resolve against the accumulated context
        context_ids = {cp.passage.passage_id for cp in session.context}
        assert set(session.final.marker_map.values()) <= context_ids

    def test_determinism_across_runs(self, session_fixture):
        initial, extra = session_fixture
        transcripts = []
        for _ in range(3):
            backends, _ = make_backends(golden_script(), initial, extra)
            session = run_session("how do rerankers help?", backends)
            record = session.to_dict()
            record.pop("session_id")
            record.pop("created_at")
            record.pop("duration_s")
            transcripts.append(record)
        assert transcripts[0] == transcripts[1] == transcripts[2]

    def test_zero_feedback_returns_verified_y0(self, two_passages):
        lm = ScriptedChatProvider([GOLDEN_Y0 + " Extra cited tail for the verifier [2].", ""])
        backends, calls = make_backends(lm, two_passages)
        session = run_session("q", backends)
        assert len(session.drafts) == 1
        assert session.feedback == []
        assert session.final.text == session.drafts[0].text
        assert calls["retrieve"] == 1

    def test_pool_empty_raises(self):
        backends, _ = make_backends(ScriptedChatProvider([]), [])
        with pytest.raises(PoolEmpty):
            run_session("q", backends)

    def test_feedback_count_caps_at_three(self, two_passages):
        five_items = "\n".join(f"{i}. Feedback item {i}." for i in range(1, 6))
        lm = ScriptedChatProvider(
            [
                GOLDEN_Y0,
                five_items,
                GOLDEN_Y1,
                GOLDEN_Y1,
                GOLDEN_Y1,
                "NONE",
            ]
        )
        backends, _ = make_backends(lm, two_passages)
        session = run_session("q", backends)
        assert len(session.feedback) == 3
        assert len(session.drafts) == 4

    def test_citations_rendered_with_provenance(self, session_fixture):
        initial, extra = session_fixture
        backends, _ = make_backends(golden_script(), initial, extra)
        session = run_session("q", backends)
        markers = [c["marker"] for c in session.citations]
        assert markers == sorted(markers)
        by_marker = {c["marker"]: c for c in session.citations}
        assert by_marker[3]["provenance"] == "web"
        assert by_marker[1]["passage_text"] == initial[0].text
