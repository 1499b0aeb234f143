"""Paper corpus: ingestion, chunking into passages, and lookup.

Papers arrive as JSONL records (one per line):

    {"id": str, "title": str, "abstract": str, "text": str,
     "year": int?, "citation_count": int?, "url": str?, "open_access": bool?}

The main text of each paper is split into whitespace-delimited blocks of at
most ``block_words`` words; the title is prefixed to every block. Papers with
no body fall back to chunking their abstract, so abstract-only papers yield a
single passage in the common case.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import PaperNotFound

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_WORDS = 250


@dataclass
class Paper:
    paper_id: str
    title: str
    abstract: str = ""
    body: str = ""
    year: int | None = None
    citation_count: int = 0
    url: str | None = None
    open_access: bool = False


@dataclass
class Passage:
    passage_id: str
    paper_id: str
    chunk_index: int
    text: str
    word_count: int

    @property
    def block_text(self) -> str:
        """Passage text with the title line stripped off."""
        _, _, block = self.text.partition("\n")
        return block


@dataclass
class CorpusStats:
    paper_count: int = 0
    passage_count: int = 0
    skipped_count: int = 0


def normalize_title(title: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    lowered = title.lower()
    stripped = re.sub(r"[^\w\s]", " ", lowered)
    return " ".join(stripped.split())


def chunk_paper(paper: Paper, block_words: int = DEFAULT_BLOCK_WORDS) -> list[Passage]:
    """Split a paper into title-prefixed passages of at most ``block_words`` words.

    Blocks are formed by whitespace tokenization of the body, filled greedily.
    When the body is empty the abstract is chunked instead, so abstract-only
    papers produce one passage for any normally sized abstract. Papers with
    neither body nor abstract yield an empty list.
    """
    if block_words < 1:
        raise ValueError(f"block_words must be >= 1, got {block_words}")
    source = paper.body if paper.body.split() else paper.abstract
    words = source.split()
    passages = []
    for start in range(0, len(words), block_words):
        block = " ".join(words[start : start + block_words])
        index = start // block_words
        passages.append(
            Passage(
                passage_id=f"{paper.paper_id}:{index}",
                paper_id=paper.paper_id,
                chunk_index=index,
                text=f"{paper.title}\n{block}",
                word_count=min(block_words, len(words) - start),
            )
        )
    return passages


def parse_paper_record(obj: object) -> Paper:
    """Validate one decoded JSONL record. Raises ValueError on bad shape."""
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    paper_id = obj.get("id")
    if not isinstance(paper_id, str) or not paper_id:
        raise ValueError("missing or invalid 'id'")
    title = obj.get("title")
    if not isinstance(title, str):
        raise ValueError("missing or invalid 'title'")
    abstract = obj.get("abstract", "")
    body = obj.get("text", "")
    if not isinstance(abstract, str) or not isinstance(body, str):
        raise ValueError("'abstract' and 'text' must be strings")
    year = obj.get("year")
    if year is not None and not isinstance(year, int):
        raise ValueError("'year' must be an integer")
    citation_count = obj.get("citation_count", 0)
    if not isinstance(citation_count, int) or isinstance(citation_count, bool) or citation_count < 0:
        raise ValueError("'citation_count' must be a non-negative integer")
    url = obj.get("url")
    if url is not None and not isinstance(url, str):
        raise ValueError("'url' must be a string")
    open_access = obj.get("open_access", False)
    if not isinstance(open_access, bool):
        raise ValueError("'open_access' must be a boolean")
    return Paper(
        paper_id=paper_id,
        title=title,
        abstract=abstract,
        body=body,
        year=year,
        citation_count=citation_count,
        url=url,
        open_access=open_access,
    )


class CorpusStore:
    """In-memory paper/passage store with JSONL persistence.

    Single-writer during ingestion; safe for concurrent readers afterwards.
    """

    def __init__(self, block_words: int = DEFAULT_BLOCK_WORDS):
        self.block_words = block_words
        self._papers: dict[str, Paper] = {}
        self._passages: dict[str, Passage] = {}
        self._by_paper: dict[str, list[Passage]] = {}
        self._titles: Counter[str] = Counter()

    def __len__(self) -> int:
        return len(self._papers)

    @property
    def paper_count(self) -> int:
        return len(self._papers)

    @property
    def passage_count(self) -> int:
        return len(self._passages)

    def add_paper(self, paper: Paper) -> list[Passage]:
        """Store a paper and its chunks. Duplicate ids: last write wins."""
        if paper.paper_id in self._papers:
            logger.warning("duplicate paper id %r: replacing earlier record", paper.paper_id)
            for old in self._by_paper.get(paper.paper_id, []):
                self._passages.pop(old.passage_id, None)
            old_title = normalize_title(self._papers[paper.paper_id].title)
            self._titles[old_title] -= 1
            if self._titles[old_title] <= 0:
                del self._titles[old_title]
        passages = chunk_paper(paper, self.block_words)
        self._papers[paper.paper_id] = paper
        self._by_paper[paper.paper_id] = passages
        for passage in passages:
            self._passages[passage.passage_id] = passage
        self._titles[normalize_title(paper.title)] += 1
        return passages

    def lookup_paper(self, paper_id: str) -> Paper:
        try:
            return self._papers[paper_id]
        except KeyError:
            raise PaperNotFound(f"unknown paper id: {paper_id!r}") from None

    def lookup_passage(self, passage_id: str) -> Passage:
        try:
            return self._passages[passage_id]
        except KeyError:
            raise PaperNotFound(f"unknown passage id: {passage_id!r}") from None

    def passages_for(self, paper_id: str) -> list[Passage]:
        return list(self._by_paper.get(paper_id, []))

    def iter_papers(self) -> Iterator[Paper]:
        return iter(self._papers.values())

    def iter_passages(self) -> Iterator[Passage]:
        return iter(self._passages.values())

    def has_title(self, normalized_title: str) -> bool:
        return normalized_title in self._titles

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "papers.jsonl", "w", encoding="utf-8") as fh:
            for paper in self._papers.values():
                fh.write(json.dumps(paper.__dict__, ensure_ascii=False) + "\n")
        (directory / "meta.json").write_text(
            json.dumps({"block_words": self.block_words}), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: str | Path) -> "CorpusStore":
        directory = Path(directory)
        meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
        store = cls(block_words=meta.get("block_words", DEFAULT_BLOCK_WORDS))
        with open(directory / "papers.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    store.add_paper(Paper(**json.loads(line)))
        return store


def ingest_corpus(records: Iterable[str], store: CorpusStore) -> CorpusStats:
    """Ingest JSONL lines into ``store``.

    Malformed lines are counted and skipped, never aborting the stream.
    Returned counts cover papers touched by this call only.
    """
    stats = CorpusStats()
    seen: set[str] = set()
    for lineno, line in enumerate(records, start=1):
        if not line.strip():
            continue
        try:
            record = parse_paper_record(json.loads(line))
        except (json.JSONDecodeError, ValueError) as exc:
            logger.warning("skipping malformed record at line %d: %s", lineno, exc)
            stats.skipped_count += 1
            continue
        store.add_paper(record)
        seen.add(record.paper_id)
    stats.paper_count = len(seen)
    stats.passage_count = sum(len(store.passages_for(pid)) for pid in seen)
    return stats


def ingest_corpus_file(path: str | Path, store: CorpusStore) -> CorpusStats:
    """Ingest a JSONL file; unreadable input raises OSError."""
    with open(path, encoding="utf-8") as fh:
        return ingest_corpus(fh, store)
