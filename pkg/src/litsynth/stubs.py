"""Deterministic offline providers.

These speak the same interfaces as the HTTP clients in ``providers`` and are
selectable from the config file, so the full pipeline can run without any
network backend: scripted chat replay, hash-seeded embeddings, token-overlap
reranking, and rule-based attribution judges.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from pathlib import Path

import numpy as np

from .providers import Message


class HashedEmbedder:
    """Embeds text as a fixed pseudo-random vector seeded by its content hash.

    Identical text always maps to the identical vector; unrelated texts are
    near-orthogonal at reasonable dimensions.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
            rng = np.random.default_rng(seed)
            out.append(rng.standard_normal(self.dim).tolist())
        return out


class TokenOverlapReranker:
    """Scores a pair by the fraction of query tokens present in the passage."""

    def score(self, query: str, passages: list[str]) -> list[float]:
        query_tokens = set(query.lower().split())
        scores = []
        for passage in passages:
            if not query_tokens:
                scores.append(0.0)
                continue
            passage_tokens = set(passage.lower().split())
            scores.append(len(query_tokens & passage_tokens) / len(query_tokens))
        return scores


class ScriptedChatProvider:
    """Replays canned completions in call order; records every call made.

    Fixture file shape: {"completions": ["...", "..."]}.
    """

    def __init__(self, completions: list[str]):
        self._completions = list(completions)
        self._cursor = 0
        self._lock = threading.Lock()
        self.calls: list[dict] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChatProvider":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(payload["completions"])

    def complete(self, messages: list[Message], temperature: float, max_tokens: int) -> str:
        with self._lock:
            if self._cursor >= len(self._completions):
                raise RuntimeError(
                    f"scripted provider exhausted after {len(self._completions)} calls"
                )
            content = self._completions[self._cursor]
            self._cursor += 1
            self.calls.append(
                {"messages": messages, "temperature": temperature, "max_tokens": max_tokens}
            )
        return content

    @property
    def calls_made(self) -> int:
        return self._cursor


def _claim_and_reference(messages: list[Message]) -> tuple[str, str]:
    """Pull the Claim/Reference sections out of an attribution prompt."""
    text = messages[-1]["content"]
    claim_match = re.search(r"Claim:\s*(.*?)(?:\n\s*Reference:|$)", text, flags=re.S)
    ref_match = re.search(r"Reference:\s*(.*)$", text, flags=re.S)
    claim = claim_match.group(1).strip() if claim_match else ""
    reference = ref_match.group(1).strip() if ref_match else ""
    return claim, reference


def _normalize(text: str) -> str:
    return " ".join(re.sub(r"[^\w\s]", " ", text.lower()).split())


class StubAttributionJudge:
    """Deterministic attribution judge over the chat protocol.

    Rules, applied to the normalized claim/reference:
      - claims differing from the reference only by negation -> Contradictory
      - claim contained verbatim in the reference -> Attributable
      - anything else -> Extrapolatory
    """

    def complete(self, messages: list[Message], temperature: float, max_tokens: int) -> str:
        claim, reference = _claim_and_reference(messages)
        claim_n, ref_n = _normalize(claim), _normalize(reference)
        if not claim_n or not ref_n:
            return "Extrapolatory"
        claim_tokens = [t for t in claim_n.split() if t != "not"]
        for sentence in re.split(r"[.!?]\s*", reference):
            sent_n = _normalize(sentence)
            sent_tokens = [t for t in sent_n.split() if t != "not"]
            if claim_tokens == sent_tokens and claim_n != sent_n:
                return "Contradictory"
        if claim_n in ref_n:
            return "Attributable"
        return "Extrapolatory"


class TokenSupportJudge:
    """Attribution judge driven by requirement/fact tokens.

    A claim containing tokens ``need<k>`` is Attributable iff the reference
    contains ``has<k>`` for every required k; Contradictory if the reference
    carries ``not<k>`` for a required k; otherwise Extrapolatory. Claims with
    no requirement tokens are vacuously Attributable.
    """

    def complete(self, messages: list[Message], temperature: float, max_tokens: int) -> str:
        claim, reference = _claim_and_reference(messages)
        needs = set(re.findall(r"\bneed(\w+)\b", claim))
        has = set(re.findall(r"\bhas(\w+)\b", reference))
        denies = set(re.findall(r"\bnot(\w+)\b", reference))
        if needs & denies:
            return "Contradictory"
        if needs <= has:
            return "Attributable"
        return "Extrapolatory"
