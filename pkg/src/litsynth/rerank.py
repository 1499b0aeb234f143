"""Cross-encoder scoring, citation-prior blending, and context selection.

The final context for the generator is produced by: score all candidates with
the rerank provider, add a citation prior (log-normalized against the pool
maximum), sort, cap passages per paper, and take the top N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import Passage
from .errors import ContractViolation
from .providers import RerankProvider

DEFAULT_PER_PAPER_CAP = 3
DEFAULT_BLEND_LAMBDA = 0.1
SCORE_BATCH_SIZE = 128


@dataclass
class RankedPassage:
    passage: Passage
    rerank_score: float
    citation_count: int
    final_score: float


def score_pairs(query: str, passages: list[Passage], provider: RerankProvider) -> list[float]:
    """One relevance score per passage, order-aligned with the input."""
    scores: list[float] = []
    for start in range(0, len(passages), SCORE_BATCH_SIZE):
        batch = passages[start : start + SCORE_BATCH_SIZE]
        batch_scores = provider.score(query, [p.text for p in batch])
        if len(batch_scores) != len(batch):
            raise ContractViolation("rerank provider returned a misaligned score batch")
        scores.extend(float(s) for s in batch_scores)
    return scores


def blend_citation_prior(
    rerank_score: float,
    citation_count: int,
    max_citation_count: int,
    blend_lambda: float = DEFAULT_BLEND_LAMBDA,
) -> float:
    """Add a normalized citation prior to a relevance score.

    final = score + lambda * log(1 + c) / log(1 + c_max); the prior is 0 when
    the pool has no cited papers, 0 at c = 0, and exactly lambda at c = c_max.
    """
    if citation_count < 0 or max_citation_count < citation_count:
        raise ValueError(
            f"need max_citation_count >= citation_count >= 0, "
            f"got {citation_count} / {max_citation_count}"
        )
    if max_citation_count == 0:
        return rerank_score
    prior = math.log1p(citation_count) / math.log1p(max_citation_count)
    return rerank_score + blend_lambda * prior


def meta_filter(
    ranked: list[RankedPassage], per_paper_cap: int = DEFAULT_PER_PAPER_CAP
) -> list[RankedPassage]:
    """Keep at most ``per_paper_cap`` passages per paper.

    Input must already be sorted descending by final score, so the kept
    passages are the highest-scored ones and relative order is preserved.
    """
    counts: dict[str, int] = {}
    kept = []
    for item in ranked:
        seen = counts.get(item.passage.paper_id, 0)
        if seen < per_paper_cap:
            counts[item.passage.paper_id] = seen + 1
            kept.append(item)
    return kept


def select_top_n(ranked: list[RankedPassage], n: int) -> list[RankedPassage]:
    if n < 0:
        raise ContractViolation(f"n must be >= 0, got {n}")
    return ranked[:n]


def rank_passages(
    query: str,
    passages: list[Passage],
    provider: RerankProvider,
    citation_counts: dict[str, int],
    *,
    blend_lambda: float = DEFAULT_BLEND_LAMBDA,
    per_paper_cap: int = DEFAULT_PER_PAPER_CAP,
    top_n: int = 10,
) -> list[RankedPassage]:
    """Full selection pipeline: score, blend, sort, cap per paper, take top N.

    ``citation_counts`` maps paper_id to its citation count; passages without
    an entry (e.g. web hits) count as 0. The prior normalizes against the
    maximum over the current pool. Equal final scores break ties by ascending
    passage id for determinism.
    """
    if not passages:
        return []
    scores = score_pairs(query, passages, provider)
    counts = [max(citation_counts.get(p.paper_id, 0), 0) for p in passages]
    max_count = max(counts, default=0)
    ranked = [
        RankedPassage(
            passage=passage,
            rerank_score=score,
            citation_count=count,
            final_score=blend_citation_prior(score, count, max_count, blend_lambda),
        )
        for passage, score, count in zip(passages, scores, counts)
    ]
    ranked.sort(key=lambda r: (-r.final_score, r.passage.passage_id))
    return select_top_n(meta_filter(ranked, per_paper_cap), top_n)
