import random

import pytest

from litsynth.corpus import CorpusStore, Paper


def make_body(n_words: int, seed: int = 0) -> str:
    rng = random.Random(seed)
    return " ".join(f"w{rng.randrange(10_000)}" for _ in range(n_words))


@pytest.fixture
def small_store() -> CorpusStore:
    store = CorpusStore()
    store.add_paper(
        Paper(
            paper_id="p1",
            title="Sparse retrieval at scale",
            abstract="We study sparse retrieval.",
            body=make_body(620, seed=1),
            year=2020,
            citation_count=40,
            url="https://example.org/p1",
            open_access=True,
        )
    )
    store.add_paper(
        Paper(
            paper_id="p2",
            title="Dense passage ranking",
            abstract="Dense rankers considered.",
            body=make_body(300, seed=2),
            year=2021,
            citation_count=5,
        )
    )
    store.add_paper(
        Paper(
            paper_id="p3",
            title="Cavity cooling of nanoparticles",
            abstract="An abstract only paper about cavity cooling.",
            body="",
            year=2019,
            citation_count=99,
        )
    )
    return store
