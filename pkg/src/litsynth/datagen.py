"""Synthetic training-data factory.

Seeds questions from sampled paper abstracts, answers them with the full
synthesis pipeline, gates the transcripts through pairwise and rubric
filters, and emits instruction-tuning records plus labeled reranker pairs.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .corpus import CorpusStore, Paper, Passage
from .errors import ContractViolation
from .evaluation import _extract_json
from .prompting import render_prompt
from .providers import ChatProvider
from .synthesize import Feedback, SynthesisSession

logger = logging.getLogger(__name__)

QUESTION_KINDS = ("literature_review", "boolean_qa", "fact_verification")
RUBRIC_FILTER_THRESHOLD = 4.5
POSITIVE_SCORES = {4, 5}
NEGATIVE_SCORES = {1, 2}


@dataclass
class TrainingExample:
    kind: str  # answer_generation | feedback_generation | feedback_incorporation
    input: str
    target: str
    seed_paper_id: str
    session_id: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input": self.input,
            "target": self.target,
            "seed_paper_id": self.seed_paper_id,
            "session_id": self.session_id,
        }


@dataclass
class RerankerPair:
    query: str
    passage: str
    label: str  # positive | negative
    raw_score: int

    def __post_init__(self):
        if self.raw_score in POSITIVE_SCORES:
            expected = "positive"
        elif self.raw_score in NEGATIVE_SCORES:
            expected = "negative"
        else:
            raise ValueError(f"raw_score {self.raw_score} is not storeable")
        if self.label != expected:
            raise ValueError(f"label {self.label!r} inconsistent with score {self.raw_score}")

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "passage": self.passage,
            "label": self.label,
            "raw_score": self.raw_score,
        }


def sample_seed_papers(
    corpus: CorpusStore, n: int, min_year: int = 2017, seed: int = 0
) -> list[Paper]:
    """Uniform sample (without replacement) of papers published after ``min_year``."""
    eligible = sorted(
        (p for p in corpus.iter_papers() if p.year is not None and p.year > min_year),
        key=lambda p: p.paper_id,
    )
    if n <= 0:
        return []
    if len(eligible) < n:
        logger.warning("only %d of %d requested seed papers are eligible", len(eligible), n)
        return eligible
    return random.Random(seed).sample(eligible, n)


def generate_question(
    abstract: str, lm: ChatProvider, kind: str = "literature_review"
) -> str | None:
    """One synthetic query from an abstract; None signals the instance is skipped."""
    if not abstract.strip():
        raise ValueError("abstract must be non-empty")
    if kind not in QUESTION_KINDS:
        raise ValueError(f"unknown question kind {kind!r}")
    completion = lm.complete(
        [{"role": "user", "content": render_prompt(f"question_{kind}", abstract=abstract)}],
        temperature=0.7,
        max_tokens=200,
    )
    for line in completion.splitlines():
        if line.strip():
            return line.strip()
    logger.warning("question generation produced nothing; skipping instance")
    return None


@dataclass
class PairwiseResult:
    chosen: str | None
    preferred: str | None  # "initial" | "refined" | None


def pairwise_filter(
    y0: str, y_final: str, lm: ChatProvider, *, question: str = "", seed: int = 0
) -> PairwiseResult:
    """Keep whichever of the initial and final drafts the judge prefers.

    Presentation order is randomized under the seed to cancel position bias.
    An unparseable verdict discards the instance (chosen=None).
    """
    if not y0.strip() or not y_final.strip():
        raise ValueError("both drafts must be non-empty")
    swap = random.Random(seed).random() < 0.5
    first, second = (y_final, y0) if swap else (y0, y_final)
    completion = lm.complete(
        [
            {
                "role": "user",
                "content": render_prompt("pairwise", question=question, a=first, b=second),
            }
        ],
        temperature=0.0,
        max_tokens=8,
    )
    verdict = completion.strip().upper()[:1]
    if verdict not in ("A", "B"):
        logger.warning("unparseable pairwise verdict %r; discarding instance", completion.strip())
        return PairwiseResult(chosen=None, preferred=None)
    picked_first = verdict == "A"
    chose_initial = picked_first != swap
    return PairwiseResult(
        chosen=y0 if chose_initial else y_final,
        preferred="initial" if chose_initial else "refined",
    )


@dataclass
class RubricFilterResult:
    passed: bool
    organization: float
    factual_citation: float
    parsed: bool = True


def rubric_filter(
    answer: str, lm: ChatProvider, threshold: float = RUBRIC_FILTER_THRESHOLD, *, question: str = ""
) -> RubricFilterResult:
    """Pass only answers scoring >= threshold on both quality categories."""
    if not answer.strip():
        raise ValueError("answer must be non-empty")
    completion = lm.complete(
        [{"role": "user", "content": render_prompt("rubric_filter", question=question, answer=answer)}],
        temperature=0.0,
        max_tokens=100,
    )
    payload = _extract_json(completion)
    if payload is None:
        logger.warning("unparseable rubric-filter output; failing closed")
        return RubricFilterResult(passed=False, organization=0.0, factual_citation=0.0, parsed=False)
    try:
        organization = float(payload["organization"])
        factual = float(payload["factual_citation"])
    except (KeyError, TypeError, ValueError):
        logger.warning("rubric-filter payload missing scores; failing closed")
        return RubricFilterResult(passed=False, organization=0.0, factual_citation=0.0, parsed=False)
    return RubricFilterResult(
        passed=organization >= threshold and factual >= threshold,
        organization=organization,
        factual_citation=factual,
    )


def serialize_feedback(items: list[Feedback]) -> str:
    """Render feedback items back into the numbered wire format."""
    lines = []
    for item in items:
        suffix = f" QUERY: {item.retrieval_query}" if item.retrieval_query else ""
        lines.append(f"{item.ordinal}. {item.text}{suffix}")
    return "\n".join(lines)


def emit_training_examples(
    session: SynthesisSession, chosen_answer: str | None = None
) -> list[TrainingExample]:
    """Instruction records from one filtered session.

    Always 1 answer-generation + 1 feedback-generation example, plus one
    feedback-incorporation example per feedback item.
    """
    answer = chosen_answer if chosen_answer is not None else session.final.text
    examples = [
        TrainingExample(
            kind="answer_generation",
            input=session.query,
            target=answer,
            seed_paper_id=session.config.get("seed_paper_id", ""),
            session_id=session.session_id,
        ),
        TrainingExample(
            kind="feedback_generation",
            input=session.drafts[0].text,
            target=serialize_feedback(session.feedback),
            seed_paper_id=session.config.get("seed_paper_id", ""),
            session_id=session.session_id,
        ),
    ]
    for item in session.feedback:
        previous = session.drafts[item.ordinal - 1]
        revised = session.drafts[item.ordinal]
        examples.append(
            TrainingExample(
                kind="feedback_incorporation",
                input=f"{previous.text}\n\nFeedback: {item.text}",
                target=revised.text,
                seed_paper_id=session.config.get("seed_paper_id", ""),
                session_id=session.session_id,
            )
        )
    return examples


def mix_training_data(
    scientific: list, general: list, sci_fraction: float = 0.5, seed: int = 0
) -> list:
    """Blend the two pools to an exact composition, sampled without replacement.

    The output is as large as the pools allow at the requested fraction, with
    integer rounding toward the scientific side, and is shuffled
    deterministically under the seed.
    """
    if not 0.0 <= sci_fraction <= 1.0:
        raise ContractViolation(f"sci_fraction must lie in [0, 1], got {sci_fraction}")
    rng = random.Random(seed)
    if sci_fraction == 1.0:
        picked = list(scientific)
        rng.shuffle(picked)
        return picked
    if sci_fraction == 0.0:
        picked = list(general)
        rng.shuffle(picked)
        return picked
    if not scientific or not general:
        raise ContractViolation("both pools must be non-empty for a mixed fraction")
    total = min(
        math.floor(len(scientific) / sci_fraction + 1e-9),
        math.floor(len(general) / (1.0 - sci_fraction) + 1e-9),
    )
    n_sci = min(math.ceil(total * sci_fraction - 1e-9), len(scientific))
    n_gen = total - n_sci
    sci_sample = rng.sample(scientific, n_sci)
    gen_sample = rng.sample(general, n_gen)
    mixed = sci_sample + gen_sample
    rng.shuffle(mixed)
    return mixed


def gen_reranker_pairs(
    abstract_queries: Iterable[str],
    retriever: Callable[[str], list[Passage]],
    lm: ChatProvider,
    top_k: int = 10,
) -> list[RerankerPair]:
    """Label retrieved passages 1-5 per query; keep 4/5 as positive, 1/2 as negative."""
    pairs: list[RerankerPair] = []
    for query in abstract_queries:
        for passage in retriever(query)[:top_k]:
            completion = lm.complete(
                [
                    {
                        "role": "user",
                        "content": render_prompt(
                            "reranker_label", query=query, passage=passage.text
                        ),
                    }
                ],
                temperature=0.0,
                max_tokens=8,
            )
            match = re.search(r"[1-5]", completion)
            if match is None:
                logger.warning("unscoreable passage for query %r; skipping", query)
                continue
            score = int(match.group(0))
            if score in POSITIVE_SCORES:
                pairs.append(RerankerPair(query, passage.text, "positive", score))
            elif score in NEGATIVE_SCORES:
                pairs.append(RerankerPair(query, passage.text, "negative", score))
            # score 3 is discarded by design
    return pairs


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
