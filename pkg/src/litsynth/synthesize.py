"""Iterative answer synthesis: draft, self-feedback, refinement, verification.

One session runs: retrieve -> rank -> initial cited draft -> up to three
feedback items -> sequential refinement (with extra retrieval when a feedback
item carries a query) -> post-hoc citation verification. All LM traffic goes
through the chat provider interface, so scripted stubs make whole sessions
reproducible byte for byte.
"""

from __future__ import annotations

import logging
import re
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable

from .corpus import Paper, Passage
from .errors import GenerationFailed, PoolEmpty, TransportError
from .evaluation import segment_statements
from .prompting import render_prompt
from .providers import ChatProvider, Message
from .retrieval import CandidatePool
from .rerank import RankedPassage

logger = logging.getLogger(__name__)

MAX_FEEDBACK_ITEMS = 3

_CITE_WITH_WS = re.compile(r"([ \t]*)\[(\d+(?:\s*,\s*\d+)*)\]")
_FEEDBACK_ITEM = re.compile(r"^\s*\d+[.)]\s*(.*\S)\s*$")
_QUERY_SUFFIX = re.compile(r"\bQUERY:\s*(.+)$")


@dataclass
class GenerationParams:
    temperature: float = 0.7
    max_answer_tokens: int = 3000
    max_feedback_tokens: int = 1000
    max_feedback_items: int = MAX_FEEDBACK_ITEMS


@dataclass
class Draft:
    text: str
    marker_map: dict[int, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class Feedback:
    ordinal: int
    text: str
    retrieval_query: str | None = None


@dataclass
class ContextPassage:
    passage: Passage
    provenance: str
    round_added: int


@dataclass
class VerificationResult:
    draft: Draft
    verified: bool
    insertions: int = 0


@dataclass
class SynthesisSession:
    session_id: str
    query: str
    config: dict
    context: list[ContextPassage]
    drafts: list[Draft]
    feedback: list[Feedback]
    final: Draft
    citations: list[dict]
    warnings: list[str]
    verified: bool
    created_at: str
    duration_s: float
    lm_calls: list[dict]
    extra_retrievals: int

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "query": self.query,
            "config": self.config,
            "context": [
                {
                    "passage_id": cp.passage.passage_id,
                    "paper_id": cp.passage.paper_id,
                    "chunk_index": cp.passage.chunk_index,
                    "text": cp.passage.text,
                    "word_count": cp.passage.word_count,
                    "provenance": cp.provenance,
                    "round_added": cp.round_added,
                }
                for cp in self.context
            ],
            "drafts": [
                {"text": d.text, "marker_map": {str(k): v for k, v in d.marker_map.items()}}
                for d in self.drafts
            ],
            "feedback": [
                {"ordinal": f.ordinal, "text": f.text, "retrieval_query": f.retrieval_query}
                for f in self.feedback
            ],
            "final": {
                "text": self.final.text,
                "marker_map": {str(k): v for k, v in self.final.marker_map.items()},
            },
            "citations": self.citations,
            "warnings": self.warnings,
            "verified": self.verified,
            "created_at": self.created_at,
            "duration_s": self.duration_s,
            "lm_calls": self.lm_calls,
            "extra_retrievals": self.extra_retrievals,
        }


def render_numbered_passages(passages: list[Passage]) -> str:
    return "\n\n".join(f"[{i}] {p.text}" for i, p in enumerate(passages, start=1))


def resolve_markers(text: str, passages: list[Passage]) -> tuple[str, dict[int, str], list[str]]:
    """Map bracketed markers to the numbered passages; strip unresolvable ones.

    Valid groups are preserved byte for byte; groups containing out-of-range
    numbers are rewritten to their valid members or removed entirely.
    """
    n = len(passages)
    marker_map: dict[int, str] = {}
    warnings: list[str] = []

    def rewrite(match: re.Match) -> str:
        numbers = [int(x) for x in match.group(2).split(",")]
        valid = [x for x in numbers if 1 <= x <= n]
        for v in valid:
            marker_map[v] = passages[v - 1].passage_id
        if len(valid) == len(numbers):
            return match.group(0)
        warnings.append(
            f"stripped unresolvable citation markers {[x for x in numbers if x not in valid]}"
        )
        if not valid:
            return ""
        return match.group(1) + "[" + ", ".join(str(v) for v in valid) + "]"

    resolved = _CITE_WITH_WS.sub(rewrite, text)
    return resolved, marker_map, warnings


def parse_feedback(completion: str, max_items: int = MAX_FEEDBACK_ITEMS) -> list[Feedback]:
    """Parse numbered feedback lines, honoring an optional trailing QUERY: part."""
    items: list[Feedback] = []
    for line in completion.splitlines():
        match = _FEEDBACK_ITEM.match(line)
        if match is None:
            continue
        body = match.group(1)
        retrieval_query = None
        query_match = _QUERY_SUFFIX.search(body)
        if query_match is not None:
            retrieval_query = query_match.group(1).strip() or None
            body = body[: query_match.start()].rstrip()
        if not body:
            continue
        items.append(Feedback(ordinal=len(items) + 1, text=body, retrieval_query=retrieval_query))
        if len(items) >= max_items:
            break
    return items


def generate_initial(
    query: str, passages: list[Passage], lm: ChatProvider, params: GenerationParams
) -> Draft:
    """First cited draft over the numbered context passages."""
    if not passages:
        raise ValueError("cannot generate without context passages")
    prompt = render_prompt(
        "answer_initial", passages=render_numbered_passages(passages), question=query
    )
    completion = lm.complete(
        [{"role": "user", "content": prompt}], params.temperature, params.max_answer_tokens
    )
    if not completion.strip():
        raise GenerationFailed("empty completion for initial draft")
    text, marker_map, warnings = resolve_markers(completion, passages)
    for warning in warnings:
        logger.warning("%s", warning)
    return Draft(text=text, marker_map=marker_map, warnings=warnings)


def generate_feedback(
    query: str, draft: Draft, lm: ChatProvider, params: GenerationParams
) -> list[Feedback]:
    prompt = render_prompt("feedback", question=query, draft=draft.text)
    completion = lm.complete(
        [{"role": "user", "content": prompt}], params.temperature, params.max_feedback_tokens
    )
    items = parse_feedback(completion, params.max_feedback_items)
    if not items and completion.strip():
        logger.warning("feedback completion had no parseable items")
    return items


def incorporate_feedback(
    query: str,
    prev_draft: Draft,
    feedback: Feedback,
    passages: list[Passage],
    lm: ChatProvider,
    params: GenerationParams,
) -> Draft:
    """Revise the previous draft against one feedback item over the full context."""
    if not passages:
        raise ValueError("cannot refine without context passages")
    prompt = render_prompt(
        "answer_refine",
        passages=render_numbered_passages(passages),
        question=query,
        previous=prev_draft.text,
        feedback=feedback.text,
    )
    completion = lm.complete(
        [{"role": "user", "content": prompt}], params.temperature, params.max_answer_tokens
    )
    if not completion.strip():
        raise GenerationFailed(f"empty completion while applying feedback {feedback.ordinal}")
    text, marker_map, warnings = resolve_markers(completion, passages)
    for warning in warnings:
        logger.warning("%s", warning)
    return Draft(text=text, marker_map=marker_map, warnings=warnings)


def _insert_marker(sentence: str, marker: int) -> str:
    if sentence and sentence[-1] in ".!?":
        return f"{sentence[:-1].rstrip()} [{marker}]{sentence[-1]}"
    return f"{sentence} [{marker}]"


def verify_citations(draft: Draft, passages: list[Passage], lm: ChatProvider) -> VerificationResult:
    """Post-hoc citation pass: insert a supporting marker for uncited statements.

    Sentences are never deleted and existing markers never touched; statements
    below the retention threshold are not considered citation-worthy. On LM
    transport failure the draft comes back unchanged with verified=False.
    """
    statements = segment_statements(draft.text)
    targets = [s for s in statements if not s.citations]
    if not targets:
        return VerificationResult(draft=draft, verified=True, insertions=0)

    rendered = render_numbered_passages(passages)
    replacements: list[tuple[int, int, str, int]] = []
    try:
        for statement in targets:
            prompt = render_prompt("verify", passages=rendered, statement=statement.text)
            completion = lm.complete([{"role": "user", "content": prompt}], 0.0, 16)
            answer = completion.strip()
            if re.fullmatch(r"(?i)none\.?", answer):
                continue
            match = re.search(r"\d+", answer)
            if match is None:
                logger.warning("unparseable verification answer %r", answer)
                continue
            marker = int(match.group(0))
            if not (1 <= marker <= len(passages)):
                logger.warning("verification chose out-of-range passage %d", marker)
                continue
            replacements.append(
                (statement.start, statement.end, _insert_marker(statement.text, marker), marker)
            )
    except TransportError as exc:
        logger.warning("verification aborted, returning draft unverified: %s", exc)
        return VerificationResult(draft=draft, verified=False, insertions=0)

    text = draft.text
    marker_map = dict(draft.marker_map)
    for start, end, replacement, marker in sorted(replacements, reverse=True):
        text = text[:start] + replacement + text[end:]
        marker_map[marker] = passages[marker - 1].passage_id
    return VerificationResult(
        draft=Draft(text=text, marker_map=marker_map, warnings=list(draft.warnings)),
        verified=True,
        insertions=len(replacements),
    )


@dataclass
class SessionBackends:
    """Engine surface the session loop needs: LM plus retrieval/ranking hooks."""

    lm: ChatProvider
    retrieve: Callable[[str], CandidatePool]
    rank: Callable[[str, CandidatePool], list[RankedPassage]]
    lookup_paper: Callable[[str], Paper | None] = lambda paper_id: None


class _RecordingLM:
    """Wraps a chat provider to log per-stage prompt/completion sizes."""

    def __init__(self, inner: ChatProvider):
        self._inner = inner
        self.stage = "init"
        self.log: list[dict] = []

    def complete(self, messages: list[Message], temperature: float, max_tokens: int) -> str:
        content = self._inner.complete(messages, temperature, max_tokens)
        self.log.append(
            {
                "stage": self.stage,
                "prompt_chars": sum(len(m.get("content", "")) for m in messages),
                "completion_chars": len(content),
            }
        )
        return content


def _build_citations(
    final: Draft,
    context: list[ContextPassage],
    papers: dict[str, Paper],
    lookup_paper: Callable[[str], Paper | None],
) -> list[dict]:
    by_id = {cp.passage.passage_id: cp for cp in context}
    citations = []
    for marker in sorted(final.marker_map):
        passage_id = final.marker_map[marker]
        entry = by_id.get(passage_id)
        if entry is None:
            continue
        paper = papers.get(entry.passage.paper_id) or lookup_paper(entry.passage.paper_id)
        title = paper.title if paper else entry.passage.text.split("\n", 1)[0]
        citations.append(
            {
                "marker": marker,
                "passage_id": passage_id,
                "paper_id": entry.passage.paper_id,
                "title": title,
                "passage_text": entry.passage.text,
                "url": paper.url if paper else None,
                "provenance": entry.provenance,
            }
        )
    return citations


def run_session(
    query: str,
    backends: SessionBackends,
    params: GenerationParams | None = None,
    config_snapshot: dict | None = None,
) -> SynthesisSession:
    """Run the full synthesis loop for one query and return its transcript."""
    params = params or GenerationParams()
    started = time.time()
    recorder = _RecordingLM(backends.lm)

    pool = backends.retrieve(query)
    if not pool.assembled:
        raise PoolEmpty(f"no candidate passages for query {query!r}")
    ranked = backends.rank(query, pool)
    if not ranked:
        raise PoolEmpty("ranking selected no context passages")

    context = [
        ContextPassage(
            passage=r.passage,
            provenance=pool.provenance.get(r.passage.passage_id, "dense"),
            round_added=0,
        )
        for r in ranked
    ]
    papers: dict[str, Paper] = dict(pool.papers)
    warnings: list[str] = []

    def current_passages() -> list[Passage]:
        return [cp.passage for cp in context]

    recorder.stage = "initial"
    y0 = generate_initial(query, current_passages(), recorder, params)
    drafts = [y0]
    warnings.extend(y0.warnings)

    recorder.stage = "feedback"
    feedback = generate_feedback(query, y0, recorder, params)

    extra_retrievals = 0
    for item in feedback:
        if item.retrieval_query:
            extra_pool = backends.retrieve(item.retrieval_query)
            extra_ranked = backends.rank(item.retrieval_query, extra_pool)
            known = {cp.passage.passage_id for cp in context}
            for r in extra_ranked:
                if r.passage.passage_id in known:
                    continue
                known.add(r.passage.passage_id)
                context.append(
                    ContextPassage(
                        passage=r.passage,
                        provenance=extra_pool.provenance.get(r.passage.passage_id, "dense"),
                        round_added=item.ordinal,
                    )
                )
            papers.update(extra_pool.papers)
            extra_retrievals += 1
        recorder.stage = f"refine_{item.ordinal}"
        revised = incorporate_feedback(
            query, drafts[-1], item, current_passages(), recorder, params
        )
        drafts.append(revised)
        warnings.extend(revised.warnings)

    recorder.stage = "verify"
    verification = verify_citations(drafts[-1], current_passages(), recorder)
    if not verification.verified:
        warnings.append("citation verification failed; answer returned unverified")

    final = verification.draft
    citations = _build_citations(final, context, papers, backends.lookup_paper)
    return SynthesisSession(
        session_id=uuid.uuid4().hex,
        query=query,
        config=dict(config_snapshot or {}),
        context=context,
        drafts=drafts,
        feedback=feedback,
        final=final,
        citations=citations,
        warnings=warnings,
        verified=verification.verified,
        created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        duration_s=round(time.time() - started, 3),
        lm_calls=recorder.log,
        extra_retrievals=extra_retrievals,
    )
