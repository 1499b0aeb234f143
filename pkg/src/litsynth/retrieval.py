"""Candidate retrieval from three sources: dense index, scholarly API, web search.

The dense index is an exact flat cosine index over L2-normalized vectors, so
similarity reduces to a dot product and results match a brute-force scan
bit for bit. The scholarly and web sources are HTTP clients configured from
the engine config; per-source failures degrade the pool instead of failing it.
"""

from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import urlsplit

import httpx
import numpy as np

from .corpus import CorpusStore, Paper, Passage, chunk_paper
from .errors import ContractViolation, PoolEmpty, SourceUnavailable, TransportError
from .prompting import render_prompt
from .providers import ChatProvider, EmbeddingProvider, call_with_retries

logger = logging.getLogger(__name__)

DEFAULT_K_DENSE = 100
DEFAULT_MAX_KEYWORDS = 3


@dataclass
class SearchClientConfig:
    endpoint: str
    limit: int = 10
    domains: tuple[str, ...] = ()
    timeout: float = 30.0
    retries: int = 2
    backoff_s: float = 0.5
    api_key: str | None = None

    def __post_init__(self):
        if self.limit < 0:
            raise ValueError("limit must be >= 0")


@dataclass
class RetrievalConfig:
    k_dense: int = DEFAULT_K_DENSE
    max_keywords: int = DEFAULT_MAX_KEYWORDS
    use_dense: bool = True
    use_scholarly: bool = False
    use_web: bool = False


@dataclass
class CandidatePool:
    """Union of per-source hits for one query, deduplicated by passage id."""

    query: str
    dense_hits: list[tuple[str, float]] = field(default_factory=list)
    api_hits: list[Passage] = field(default_factory=list)
    web_hits: list[Passage] = field(default_factory=list)
    assembled: list[Passage] = field(default_factory=list)
    papers: dict[str, Paper] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)
    degraded: bool = False
    source_errors: dict[str, str] = field(default_factory=dict)


def embed_batch(texts: list[str], provider: EmbeddingProvider) -> list[np.ndarray]:
    """Embed texts with the provider, enforcing one vector per input and a stable dim."""
    if not texts:
        return []
    raw = provider.embed(list(texts))
    if len(raw) != len(texts):
        raise ContractViolation(f"expected {len(texts)} vectors, got {len(raw)}")
    vectors = [np.asarray(v, dtype=np.float64) for v in raw]
    dims = {v.shape for v in vectors}
    if len(dims) != 1 or vectors[0].ndim != 1:
        raise ContractViolation(f"inconsistent embedding dims: {sorted(dims)}")
    return vectors


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


class VectorIndex:
    """Immutable exact cosine index. Vectors are normalized at build time."""

    def __init__(self, ids: list[str], matrix: np.ndarray):
        self.ids = ids
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1]) if self.matrix.size else 0

    def __len__(self) -> int:
        return len(self.ids)

    def search(self, query_vector: np.ndarray, k: int = 100) -> list[tuple[str, float]]:
        return index_search(self, query_vector, k)

    def save(self, path: str | Path) -> None:
        np.savez_compressed(path, ids=np.array(self.ids, dtype=object), matrix=self.matrix)

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = np.load(path, allow_pickle=True)
        return cls(ids=[str(i) for i in data["ids"]], matrix=data["matrix"])


def index_build(
    passages: Sequence[Passage] | Sequence[str], vectors: Sequence[np.ndarray]
) -> VectorIndex:
    """Build an index from aligned passages (or raw ids) and vectors."""
    ids = [p.passage_id if isinstance(p, Passage) else str(p) for p in passages]
    if len(ids) != len(vectors):
        raise ContractViolation(f"{len(ids)} passages but {len(vectors)} vectors")
    if not ids:
        return VectorIndex(ids=[], matrix=np.zeros((0, 0)))
    matrix = np.vstack([np.asarray(v, dtype=np.float64) for v in vectors])
    if matrix.ndim != 2:
        raise ContractViolation("vectors must be one-dimensional and uniform")
    return VectorIndex(ids=ids, matrix=_normalize_rows(matrix))


def index_search(
    index: VectorIndex, query_vector: np.ndarray, k: int = 100
) -> list[tuple[str, float]]:
    """Exact top-k by cosine similarity, ties broken by ascending passage id."""
    if k < 0:
        raise ContractViolation("k must be >= 0")
    if k == 0 or len(index) == 0:
        return []
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (index.dim,):
        raise ContractViolation(f"query dim {query.shape} != index dim {index.dim}")
    norm = np.linalg.norm(query)
    if norm > 0:
        query = query / norm
    similarities = index.matrix @ query
    order = sorted(range(len(index)), key=lambda i: (-similarities[i], index.ids[i]))
    return [(index.ids[i], float(similarities[i])) for i in order[:k]]


def generate_keywords(
    query: str, lm: ChatProvider, max_keywords: int = DEFAULT_MAX_KEYWORDS
) -> list[str]:
    """Ask the LM for search keywords; parse one per line, dedupe, cap the count."""
    prompt = render_prompt("keywords", question=query, max_keywords=max_keywords)
    completion = lm.complete(
        [{"role": "user", "content": prompt}], temperature=0.0, max_tokens=200
    )
    keywords: list[str] = []
    seen = set()
    for line in completion.splitlines():
        keyword = re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", line).strip()
        if not keyword:
            continue
        folded = keyword.lower()
        if folded in seen:
            continue
        seen.add(folded)
        keywords.append(keyword)
        if len(keywords) >= max_keywords:
            break
    if not keywords:
        logger.warning("no keywords parsed from LM output for query %r", query)
    return keywords


class ScholarlyApiClient:
    """GET client for a paper search API returning citation-ranked metadata."""

    def __init__(self, config: SearchClientConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        headers = {"x-api-key": config.api_key} if config.api_key else {}
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)

    def search(self, query: str) -> list[dict]:
        def attempt() -> list[dict]:
            try:
                response = self._client.get(
                    self.config.endpoint, params={"query": query, "limit": self.config.limit}
                )
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
            if response.status_code != 200:
                raise TransportError(f"scholarly API -> HTTP {response.status_code}")
            return response.json().get("data", [])

        try:
            return call_with_retries(attempt, self.config.retries, self.config.backoff_s)
        except TransportError as exc:
            raise SourceUnavailable(f"scholarly API unavailable: {exc}") from exc


def scholarly_search(keyword: str, client: ScholarlyApiClient) -> list[Paper]:
    """Top papers for one keyword, sorted descending by citation count."""
    entries = client.search(keyword)
    papers = []
    for entry in entries:
        paper_id = entry.get("paperId")
        title = entry.get("title")
        if not paper_id or title is None:
            continue
        papers.append(
            Paper(
                paper_id=str(paper_id),
                title=title,
                abstract=entry.get("abstract") or "",
                year=entry.get("year"),
                citation_count=max(int(entry.get("citationCount") or 0), 0),
                url=entry.get("url"),
                open_access=bool(entry.get("isOpenAccess", False)),
            )
        )
    papers.sort(key=lambda p: -p.citation_count)
    return papers[: client.config.limit]


def abstract_passage(paper: Paper, block_words: int = 250) -> Passage | None:
    """One abstract-backed passage for an externally fetched paper."""
    words = paper.abstract.split()
    if not words:
        return None
    return Passage(
        passage_id=f"{paper.paper_id}:abs",
        paper_id=paper.paper_id,
        chunk_index=0,
        text=f"{paper.title}\n{' '.join(words[:block_words])}",
        word_count=min(len(words), block_words),
    )


def _hostname_allowed(url: str, domains: tuple[str, ...]) -> bool:
    host = (urlsplit(url).hostname or "").lower()
    return any(host == d or host.endswith("." + d) for d in (dd.lower() for dd in domains))


class WebSearchClient:
    """Client for a domain-filtered web search endpoint.

    Expected response: {"results": [{"url", "title", "abstract"?, "text"?,
    "is_open_access"?}]}.
    """

    def __init__(self, config: SearchClientConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        headers = {"x-api-key": config.api_key} if config.api_key else {}
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)

    def search(self, query: str) -> list[dict]:
        def attempt() -> list[dict]:
            try:
                response = self._client.get(
                    self.config.endpoint,
                    params={
                        "query": query,
                        "limit": self.config.limit,
                        "domains": ",".join(self.config.domains),
                    },
                )
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
            if response.status_code != 200:
                raise TransportError(f"web search -> HTTP {response.status_code}")
            return response.json().get("results", [])

        try:
            return call_with_retries(attempt, self.config.retries, self.config.backoff_s)
        except TransportError as exc:
            raise SourceUnavailable(f"web search unavailable: {exc}") from exc


def web_search(
    query: str,
    client: WebSearchClient,
    papers_out: dict[str, Paper] | None = None,
) -> list[Passage]:
    """Domain-restricted web hits as passages.

    Open-access hits with full text are chunked; everything else contributes
    its abstract only. Results outside the configured domain allowlist are
    dropped regardless of what the endpoint returned.
    """
    results = client.search(query)
    passages: list[Passage] = []
    count = 0
    for entry in results:
        url = entry.get("url") or ""
        if not _hostname_allowed(url, client.config.domains):
            continue
        if count >= client.config.limit:
            break
        count += 1
        digest = hashlib.sha1(url.encode("utf-8")).hexdigest()[:16]
        paper = Paper(
            paper_id=f"web:{digest}",
            title=entry.get("title") or url,
            abstract=entry.get("abstract") or "",
            body=entry.get("text") or "",
            url=url,
            citation_count=0,
            open_access=bool(entry.get("is_open_access", False)),
        )
        if papers_out is not None:
            papers_out[paper.paper_id] = paper
        if paper.open_access and paper.body.split():
            passages.extend(chunk_paper(paper))
        else:
            single = abstract_passage(paper)
            if single is not None:
                passages.append(single)
    return passages


@dataclass
class SourceClients:
    embedder: EmbeddingProvider | None = None
    scholarly: ScholarlyApiClient | None = None
    web: WebSearchClient | None = None


def assemble_candidates(
    query: str,
    store: CorpusStore,
    index: VectorIndex | None,
    lm: ChatProvider,
    clients: SourceClients,
    config: RetrievalConfig,
) -> CandidatePool:
    """Fetch all enabled sources concurrently and merge them into one pool.

    A source that errors contributes nothing and flags the pool as degraded;
    only when every enabled source errors (or none is enabled) does assembly
    raise PoolEmpty.
    """
    pool = CandidatePool(query=query)

    def fetch_dense() -> list[tuple[str, float]]:
        vectors = embed_batch([query], clients.embedder)
        return index_search(index, vectors[0], k=config.k_dense)

    def fetch_api() -> list[Passage]:
        hits: list[Passage] = []
        for keyword in generate_keywords(query, lm, config.max_keywords):
            for paper in scholarly_search(keyword, clients.scholarly):
                pool.papers[paper.paper_id] = paper
                passage = abstract_passage(paper)
                if passage is not None:
                    hits.append(passage)
        return hits

    def fetch_web() -> list[Passage]:
        return web_search(query, clients.web, papers_out=pool.papers)

    jobs: list[tuple[str, Callable]] = []
    if config.use_dense and index is not None and clients.embedder is not None:
        jobs.append(("dense", fetch_dense))
    if config.use_scholarly and clients.scholarly is not None:
        jobs.append(("api", fetch_api))
    if config.use_web and clients.web is not None:
        jobs.append(("web", fetch_web))
    if not jobs:
        raise PoolEmpty("no retrieval sources are enabled")

    results: dict[str, object] = {}
    with ThreadPoolExecutor(max_workers=len(jobs)) as executor:
        futures = {name: executor.submit(fn) for name, fn in jobs}
        for name, future in futures.items():
            try:
                results[name] = future.result()
            except (SourceUnavailable, TransportError) as exc:
                logger.warning("source %s failed: %s", name, exc)
                pool.degraded = True
                pool.source_errors[name] = str(exc)

    if not results:
        raise PoolEmpty(f"all retrieval sources failed: {pool.source_errors}")

    pool.dense_hits = results.get("dense", [])
    pool.api_hits = results.get("api", [])
    pool.web_hits = results.get("web", [])

    seen: set[str] = set()

    def admit(passage: Passage, source: str) -> None:
        if passage.passage_id in seen:
            return
        seen.add(passage.passage_id)
        pool.assembled.append(passage)
        pool.provenance[passage.passage_id] = source

    for passage_id, _score in pool.dense_hits:
        admit(store.lookup_passage(passage_id), "dense")
    for passage in pool.api_hits:
        admit(passage, "api")
    for passage in pool.web_hits:
        admit(passage, "web")
    return pool
