"""Command-line twin of the service: index, search, expand, ask, eval, serve.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 upstream failure.
Default output is line-oriented for piping; --format pretty is for humans.
"""

from __future__ import annotations

import argparse
import json
import sys

from .corpus import load_corpus_file
from .embed import Embedder
from .errors import (
    BadResponse,
    DocfunnelError,
    EmbeddingFailure,
    EmbeddingTimeout,
    ParseError,
    ScorerFailure,
)
from .evaluation import (
    NDCG_CUTOFF,
    RETRIEVAL_DEPTH,
    StorageParams,
    estimate_storage,
    evaluate_run,
    load_mldr_subset,
)
from .expansion import STRATEGIES, load_ontology, load_verb_lexicon
from .service import Engine, ServiceConfig, serve
from .sparse import build_index, load_index, save_index

USAGE_ERROR = 1
DATA_ERROR = 2
UPSTREAM_ERROR = 3


class CliParser(argparse.ArgumentParser):
    # usage problems exit 1 per the CLI contract, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(prog="docfunnel", description=__doc__)
    parser.add_argument("--format", choices=["lines", "pretty"], default="lines")
    parser.add_argument("--config", help="service config file (JSON)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and persist a sparse index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("search", help="search the corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", help="optional persisted index (skips rebuild)")
    p.add_argument("--query", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="should-expansion")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--ontology")
    p.add_argument("--lexicon")

    p = sub.add_parser("expand", help="print the clause tree for a query")
    p.add_argument("--query", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="should-expansion")
    p.add_argument("--ontology")
    p.add_argument("--lexicon")

    p = sub.add_parser("ask", help="question answering inside one document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--doc-id", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--output", choices=["extractive", "chain", "packed"],
                   default="extractive")

    p = sub.add_parser("eval", help="evaluate a strategy over queries + qrels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="should-expansion")
    p.add_argument("--ontology")
    p.add_argument("--lexicon")
    p.add_argument("--depth", type=int, default=RETRIEVAL_DEPTH)
    p.add_argument("--cutoff", type=int, default=NDCG_CUTOFF)

    p = sub.add_parser("estimate-storage", help="dense vs sparse storage bytes")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--chunks", type=int, required=True)
    p.add_argument("--dims", type=int, required=True)
    p.add_argument("--bytes-per-dim", type=int, required=True)
    p.add_argument("--token-bytes", type=int, default=0,
                   help="average token bytes per document")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--port", type=int)

    return parser


def _load_expansion(args):
    ontology = None
    lexicon = None
    if getattr(args, "ontology", None):
        ontology, warnings = load_ontology(args.ontology)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
    if getattr(args, "lexicon", None):
        lexicon = load_verb_lexicon(args.lexicon)
    return ontology, lexicon


def _corpus(path):
    report = load_corpus_file(path)
    for err in report.errors:
        print(f"warning: line {err.line}: {err}", file=sys.stderr)
    return report.corpus


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR

    try:
        return _dispatch(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ParseError as exc:
        line = f" (line {exc.line})" if exc.line else ""
        print(f"error: parse error{line}: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (EmbeddingFailure, EmbeddingTimeout, BadResponse, ScorerFailure) as exc:
        print(f"error: upstream failure: {exc}", file=sys.stderr)
        return UPSTREAM_ERROR
    except DocfunnelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


def _dispatch(args) -> int:
    pretty = args.format == "pretty"

    if args.command == "index":
        corpus = _corpus(args.corpus)
        index_set = build_index(corpus)
        save_index(index_set, args.out)
        print(f"indexed {len(corpus)} documents -> {args.out}")
        return 0

    if args.command == "search":
        corpus = _corpus(args.corpus)
        ontology, lexicon = _load_expansion(args)
        index_set = load_index(args.index, corpus=corpus) if args.index else None
        engine = Engine(
            corpus, index_set=index_set, ontology=ontology, lexicon=lexicon,
            strategy=args.strategy,
        )
        results, trace_id, _ = engine.search(query=args.query, strategy=args.strategy,
                                             k=args.k)
        if pretty:
            print(f"query: {args.query}  strategy: {args.strategy}  trace: {trace_id}")
            for r in results:
                title = corpus.get(r.doc_id).title
                print(f"{r.rank:>4}  {r.score:10.4f}  {r.doc_id}  {title}")
        else:
            for r in results:
                print(f"{r.rank}\t{r.doc_id}\t{r.score:.6f}")
        return 0

    if args.command == "expand":
        ontology, lexicon = _load_expansion(args)
        from .expansion import build_query_plan

        plan = build_query_plan(args.query, args.strategy, ontology=ontology,
                                lexicon=lexicon)
        record = plan.to_record()
        print(json.dumps(record, indent=2 if pretty else None, ensure_ascii=False))
        return 0

    if args.command == "ask":
        corpus = _corpus(args.corpus)
        engine = Engine(corpus, index_set=None, embedder=Embedder())
        bundle, trace_id, _ = engine.ask(args.doc_id, args.question)
        record = bundle.to_record()
        if pretty:
            print(f"question: {args.question}  trace: {trace_id}")
            if args.output == "extractive":
                for p in record["passages"]:
                    print(f"chunk {p['chunk_id']} [{p['start']}:{p['end']}] "
                          f"{p['score']:.4f}  {p['text']}")
            elif args.output == "chain":
                for step in record["chain"]:
                    print(f"hop {step['hop']}:")
                    for ev in step["evidence"]:
                        print(f"  chunk {ev['chunk_id']} ({ev['score']:.4f}) {ev['excerpt']}")
            else:
                print(f"context chunks: {record['context']}")
        else:
            if args.output == "extractive":
                for p in record["passages"]:
                    print(f"{p['chunk_id']}\t{p['start']}\t{p['end']}\t"
                          f"{p['score']:.6f}\t{p['text']}")
            elif args.output == "chain":
                print(json.dumps(record["chain"], ensure_ascii=False))
            else:
                print(json.dumps(record["context"]))
        return 0

    if args.command == "eval":
        queries, corpus, qrels, warnings = load_mldr_subset(
            args.queries, args.corpus, args.qrels
        )
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        ontology, lexicon = _load_expansion(args)
        index_set = build_index(corpus)
        result = evaluate_run(
            index_set, queries, qrels, args.strategy,
            ontology=ontology, lexicon=lexicon, depth=args.depth, cutoff=args.cutoff,
        )
        for diag in result.diagnostics:
            rec = {
                "query_id": diag.query_id,
                "results": diag.result_count,
                "ndcg": diag.ndcg,
            }
            if diag.error:
                rec["error"] = diag.error
            print(json.dumps(rec))
        print(json.dumps(result.summary_record()))
        return 0

    if args.command == "estimate-storage":
        dense, sparse_bytes = estimate_storage(
            StorageParams(
                doc_count=args.docs,
                chunks_per_doc=args.chunks,
                embedding_dim=args.dims,
                bytes_per_dim=args.bytes_per_dim,
                avg_token_bytes_per_doc=args.token_bytes,
            )
        )
        if pretty:
            print(f"dense:  {dense:,} bytes ({dense / 1e12:.4f} TB)")
            print(f"sparse: {sparse_bytes:,} bytes ({sparse_bytes / 1e9:.4f} GB)")
        else:
            print(f"dense\t{dense}")
            print(f"sparse\t{sparse_bytes}")
        return 0

    if args.command == "serve":
        config = ServiceConfig.load(args.config)
        if args.port:
            config.port = args.port
        serve(config)
        return 0

    raise DocfunnelError(f"unknown command {args.command!r}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
