"""Command-line interface.

Subcommands: ingest, index, query, serve, eval, datagen. ``query`` acts as a
thin client of a running service when --server is given; everything else runs
in process against the configured engine.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import httpx

from .config import EngineConfig, load_config
from .corpus import CorpusStore, ingest_corpus_file
from .datagen import (
    emit_training_examples,
    gen_reranker_pairs,
    generate_question,
    pairwise_filter,
    rubric_filter,
    sample_seed_papers,
    write_jsonl,
)
from .errors import EngineError
from .evaluation import (
    EvalConfig,
    make_constant_system,
    make_predictions_system,
    run_benchmark,
)

logger = logging.getLogger(__name__)


def _engine(args) -> "Engine":
    from .engine import Engine

    config = load_config(args.config) if args.config else EngineConfig()
    return Engine(config)


def cmd_ingest(args) -> int:
    store = CorpusStore.load(args.store) if Path(args.store).exists() else CorpusStore()
    stats = ingest_corpus_file(args.corpus, store)
    store.save(args.store)
    print(
        f"ingested {stats.paper_count} papers / {stats.passage_count} passages "
        f"({stats.skipped_count} skipped) -> {args.store}"
    )
    return 0


def cmd_index(args) -> int:
    config = load_config(args.config) if args.config else EngineConfig()
    if args.store:
        config = config.model_copy(update={"corpus_dir": args.store})
    if args.index:
        config = config.model_copy(update={"index_path": args.index})
    from .engine import Engine

    engine = Engine(config)
    index = engine.build_index()
    print(f"indexed {len(index)} passages (dim {index.dim}) -> {config.index_path}")
    return 0


def _print_answer(answer: str, citations: list[dict]) -> None:
    print(answer)
    if citations:
        print("\nCitations:")
        for citation in citations:
            url = f" <{citation['url']}>" if citation.get("url") else ""
            print(f"  [{citation['marker']}] {citation['title']}{url}")


def cmd_query(args) -> int:
    overrides = {}
    if args.top_n is not None:
        overrides["top_n"] = args.top_n
    if args.server:
        payload = {"question": args.question}
        if overrides:
            payload["overrides"] = overrides
        response = httpx.post(f"{args.server.rstrip('/')}/v1/query", json=payload, timeout=300)
        if response.status_code != 200:
            print(f"service error {response.status_code}: {response.text}", file=sys.stderr)
            return 1
        body = response.json()
        _print_answer(body["answer"], body.get("citations", []))
        print(f"\nsession: {body['session_id']}")
        return 0
    engine = _engine(args)
    session = engine.run_query(args.question, overrides)
    _print_answer(session.final.text, session.citations)
    print(f"\nsession: {session.session_id}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_engine(args))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_eval(args) -> int:
    if args.answers:
        system = make_predictions_system(args.answers)
    elif args.constant_answer is not None:
        system = make_constant_system(args.constant_answer)
    else:
        system = _engine(args).eval_system()
    config_obj = load_config(args.config) if args.config else EngineConfig()
    from .engine import build_chat_provider

    judge_cfg = config_obj.judge or config_obj.lm
    judge = build_chat_provider(judge_cfg, config_obj)
    report = run_benchmark(
        args.dataset,
        system,
        judges={"default": judge},
        config=EvalConfig(task=args.task, report_path=args.report),
    )
    print(json.dumps(report["aggregates"], indent=2))
    print(f"report written to {args.report}")
    return 0


def cmd_datagen(args) -> int:
    engine = _engine(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = sample_seed_papers(engine.store, args.n_seeds, min_year=args.min_year, seed=args.seed)

    examples = []
    kept = 0
    for i, paper in enumerate(seeds):
        if not paper.abstract.strip():
            continue
        question = generate_question(paper.abstract, engine.lm)
        if question is None:
            continue
        try:
            session = engine.run_query(question, persist=False)
        except EngineError as exc:
            logger.warning("session for seed %s failed: %s", paper.paper_id, exc)
            continue
        session.config["seed_paper_id"] = paper.paper_id
        verdict = pairwise_filter(
            session.drafts[0].text,
            session.final.text,
            engine.judge,
            question=question,
            seed=args.seed + i,
        )
        if verdict.chosen is None:
            continue
        gate = rubric_filter(verdict.chosen, engine.judge, question=question)
        if not gate.passed:
            continue
        kept += 1
        examples.extend(e.to_dict() for e in emit_training_examples(session, verdict.chosen))

    examples_path = out_dir / "training_examples.jsonl"
    write_jsonl(examples_path, examples)
    print(f"{kept} sessions kept; {len(examples)} training examples -> {examples_path}")

    if args.reranker_pairs:
        queries = []
        for paper in seeds:
            if paper.abstract.strip():
                question = generate_question(paper.abstract, engine.lm)
                if question:
                    queries.append(question)

        def retrieve_top(query: str):
            pool = engine.retrieve(query)
            return [r.passage for r in engine.rank(query, pool, top_n=10)]

        pairs = gen_reranker_pairs(queries, retrieve_top, engine.judge)
        pairs_path = out_dir / "reranker_pairs.jsonl"
        write_jsonl(pairs_path, (p.to_dict() for p in pairs))
        print(f"{len(pairs)} reranker pairs -> {pairs_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="litsynth",
        description="Literature synthesis engine: ingest, index, query, serve, eval, datagen.",
    )
    parser.add_argument("--config", help="path to the JSON config file")
    sub = parser.add_subparsers(dest="command")

    p_ingest = sub.add_parser("ingest", help="ingest a JSONL paper corpus")
    p_ingest.add_argument("--corpus", required=True, help="input JSONL file")
    p_ingest.add_argument("--store", required=True, help="corpus store directory")
    p_ingest.set_defaults(fn=cmd_ingest)

    p_index = sub.add_parser("index", help="embed passages and build the dense index")
    p_index.add_argument("--store", help="corpus store directory (overrides config)")
    p_index.add_argument("--index", help="output index path (overrides config)")
    p_index.set_defaults(fn=cmd_index)

    p_query = sub.add_parser("query", help="answer one question")
    p_query.add_argument("--question", required=True)
    p_query.add_argument("--top-n", type=int, dest="top_n")
    p_query.add_argument("--server", help="query a running service instead of in-process")
    p_query.set_defaults(fn=cmd_query)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(fn=cmd_serve)

    p_eval = sub.add_parser("eval", help="run the benchmark harness")
    p_eval.add_argument("--dataset", required=True, help="JSONL dataset file")
    p_eval.add_argument("--task", choices=["closed", "longform", "rubric", "judged", "cite"])
    p_eval.add_argument("--answers", help="pre-generated system outputs (JSONL)")
    p_eval.add_argument("--constant-answer", help="stub system answering a constant string")
    p_eval.add_argument("--report", default="report.json", help="output report path")
    p_eval.set_defaults(fn=cmd_eval)

    p_datagen = sub.add_parser("datagen", help="generate synthetic training data")
    p_datagen.add_argument("--out", required=True, help="output directory")
    p_datagen.add_argument("--n-seeds", type=int, default=10, dest="n_seeds")
    p_datagen.add_argument("--min-year", type=int, default=2017, dest="min_year")
    p_datagen.add_argument("--seed", type=int, default=0)
    p_datagen.add_argument("--reranker-pairs", action="store_true", dest="reranker_pairs")
    p_datagen.set_defaults(fn=cmd_datagen)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
