"""Wires config, corpus, index, and providers into a runnable query engine."""

from __future__ import annotations

import logging
from pathlib import Path

from . import retrieval
from .config import EngineConfig, ProviderConfig
from .corpus import CorpusStore, Paper
from .errors import PaperNotFound
from .providers import (
    ChatProvider,
    HttpChatClient,
    HttpEmbeddingClient,
    HttpRerankClient,
)
from .rerank import RankedPassage, rank_passages
from .retrieval import (
    CandidatePool,
    RetrievalConfig,
    ScholarlyApiClient,
    SearchClientConfig,
    SourceClients,
    VectorIndex,
    WebSearchClient,
    embed_batch,
    index_build,
)
from .sessions import SessionStore
from .stubs import HashedEmbedder, ScriptedChatProvider, TokenOverlapReranker
from .synthesize import GenerationParams, SessionBackends, SynthesisSession, run_session

logger = logging.getLogger(__name__)


def build_chat_provider(cfg: ProviderConfig, engine_cfg: EngineConfig) -> ChatProvider:
    if cfg.kind == "scripted":
        return ScriptedChatProvider.from_file(cfg.fixture)
    if cfg.kind == "http":
        return HttpChatClient(
            cfg.endpoint,
            model=cfg.model or "default",
            timeout=engine_cfg.timeout_s,
            api_key=cfg.api_key(),
            retries=engine_cfg.retries,
            backoff_s=engine_cfg.backoff_s,
            max_in_flight=engine_cfg.max_in_flight,
        )
    raise ValueError(f"provider kind {cfg.kind!r} is not a chat provider")


def build_embedding_provider(cfg: ProviderConfig, engine_cfg: EngineConfig):
    if cfg.kind == "hashed":
        return HashedEmbedder(dim=cfg.dim)
    if cfg.kind == "http":
        return HttpEmbeddingClient(
            cfg.endpoint,
            timeout=engine_cfg.timeout_s,
            api_key=cfg.api_key(),
            retries=engine_cfg.retries,
            backoff_s=engine_cfg.backoff_s,
            max_in_flight=engine_cfg.max_in_flight,
        )
    raise ValueError(f"provider kind {cfg.kind!r} is not an embedding provider")


def build_rerank_provider(cfg: ProviderConfig, engine_cfg: EngineConfig):
    if cfg.kind == "overlap":
        return TokenOverlapReranker()
    if cfg.kind == "http":
        return HttpRerankClient(
            cfg.endpoint,
            timeout=engine_cfg.timeout_s,
            api_key=cfg.api_key(),
            retries=engine_cfg.retries,
            backoff_s=engine_cfg.backoff_s,
            max_in_flight=engine_cfg.max_in_flight,
        )
    raise ValueError(f"provider kind {cfg.kind!r} is not a rerank provider")


class Engine:
    """Owns the corpus, index, providers, and session store for one deployment."""

    def __init__(self, config: EngineConfig, store: CorpusStore | None = None,
                 index: VectorIndex | None = None):
        self.config = config
        self.store = store if store is not None else self._load_store(config)
        self.index = index if index is not None else self._load_index(config)
        self.embedder = build_embedding_provider(config.embed, config)
        self.reranker = build_rerank_provider(config.rerank, config)
        self.lm = build_chat_provider(config.lm, config)
        self.judge = build_chat_provider(config.judge, config) if config.judge else self.lm
        self.sessions = SessionStore(config.sessions_dir)
        self.clients = SourceClients(
            embedder=self.embedder,
            scholarly=self._build_search_client(config, "scholarly"),
            web=self._build_search_client(config, "web"),
        )
        self.retrieval_config = RetrievalConfig(
            k_dense=config.k_dense,
            max_keywords=config.max_keywords,
            use_dense=config.sources.dense,
            use_scholarly=config.sources.scholarly,
            use_web=config.sources.web,
        )

    @staticmethod
    def _load_store(config: EngineConfig) -> CorpusStore:
        if config.corpus_dir and Path(config.corpus_dir).exists():
            return CorpusStore.load(config.corpus_dir)
        logger.warning("no corpus_dir configured or present; starting with an empty store")
        return CorpusStore()

    def _load_index(self, config: EngineConfig) -> VectorIndex | None:
        if config.index_path and Path(config.index_path).exists():
            return VectorIndex.load(config.index_path)
        return None

    def _build_search_client(self, config: EngineConfig, which: str):
        cfg = getattr(config, which)
        if cfg is None:
            return None
        client_config = SearchClientConfig(
            endpoint=cfg.endpoint,
            limit=cfg.limit,
            domains=tuple(cfg.domains),
            timeout=config.timeout_s,
            retries=config.retries,
            backoff_s=config.backoff_s,
            api_key=cfg.api_key(),
        )
        if which == "scholarly":
            return ScholarlyApiClient(client_config)
        return WebSearchClient(client_config)

    def build_index(self) -> VectorIndex:
        """Embed every stored passage and (re)build the dense index."""
        passages = sorted(self.store.iter_passages(), key=lambda p: p.passage_id)
        vectors = embed_batch([p.text for p in passages], self.embedder)
        self.index = index_build(passages, vectors)
        if self.config.index_path:
            self.index.save(self.config.index_path)
        return self.index

    def retrieve(self, query: str) -> CandidatePool:
        return retrieval.assemble_candidates(
            query,
            store=self.store,
            index=self.index,
            lm=self.lm,
            clients=self.clients,
            config=self.retrieval_config,
        )

    def rank(self, query: str, pool: CandidatePool, top_n: int | None = None) -> list[RankedPassage]:
        citation_counts = {}
        for passage in pool.assembled:
            paper = pool.papers.get(passage.paper_id)
            if paper is None:
                try:
                    paper = self.store.lookup_paper(passage.paper_id)
                except PaperNotFound:
                    paper = None
            citation_counts[passage.paper_id] = paper.citation_count if paper else 0
        return rank_passages(
            query,
            pool.assembled,
            self.reranker,
            citation_counts,
            blend_lambda=self.config.citation_blend_lambda,
            per_paper_cap=self.config.per_paper_cap,
            top_n=top_n if top_n is not None else self.config.top_n,
        )

    def lookup_paper_meta(self, paper_id: str) -> Paper | None:
        try:
            return self.store.lookup_paper(paper_id)
        except PaperNotFound:
            return None

    def backends(self, top_n: int | None = None) -> SessionBackends:
        return SessionBackends(
            lm=self.lm,
            retrieve=self.retrieve,
            rank=lambda query, pool: self.rank(query, pool, top_n=top_n),
            lookup_paper=self.lookup_paper_meta,
        )

    def run_query(self, question: str, overrides: dict | None = None,
                  persist: bool = True) -> SynthesisSession:
        """Run one synthesis session and persist its transcript."""
        overrides = overrides or {}
        params = GenerationParams(
            temperature=float(overrides.get("temperature", self.config.temperature)),
            max_answer_tokens=int(
                overrides.get("max_answer_tokens", self.config.max_answer_tokens)
            ),
            max_feedback_tokens=int(
                overrides.get("max_feedback_tokens", self.config.max_feedback_tokens)
            ),
            max_feedback_items=int(
                overrides.get("max_feedback_items", self.config.max_feedback_items)
            ),
        )
        top_n = overrides.get("top_n")
        snapshot = self.config.snapshot()
        if overrides:
            snapshot["overrides"] = dict(overrides)
        session = run_session(
            question,
            self.backends(top_n=int(top_n) if top_n is not None else None),
            params=params,
            config_snapshot=snapshot,
        )
        if persist:
            self.sessions.save(session.session_id, session.to_dict())
        return session

    def eval_system(self):
        """System-under-test adapter for the benchmark runner."""

        def system(record: dict) -> dict:
            session = self.run_query(str(record.get("question", "")), persist=False)
            return {
                "id": record.get("id"),
                "answer": session.final.text,
                "citations": session.citations,
            }

        return system
