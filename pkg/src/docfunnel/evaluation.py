"""Retrieval evaluation: nDCG@10, empty-result rates, and storage estimates.

Datasets follow the long-document retrieval layout: a line-delimited corpus,
tab-separated queries, and tab-separated binary qrels. Evaluation runs each
query through plan building and execution at depth 1000 and aggregates
nDCG@10 plus the fraction of queries that return nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, load_corpus_file
from .errors import DocfunnelError, NoPositives, ParseError
from .expansion import Ontology, build_query_plan
from .sparse import IndexSet, execute_query_plan

NDCG_CUTOFF = 10
RETRIEVAL_DEPTH = 1000


@dataclass(frozen=True)
class QuerySet:
    queries: tuple[tuple[str, str], ...]  # (query_id, text)

    def __post_init__(self):
        ids = [q for q, _ in self.queries]
        if len(ids) != len(set(ids)):
            raise DocfunnelError("query ids must be unique")

    def __len__(self) -> int:
        return len(self.queries)


@dataclass
class Qrels:
    grades: dict[tuple[str, str], int]  # (query_id, doc_id) -> 0/1

    def positives(self, query_id: str) -> set[str]:
        return {d for (q, d), g in self.grades.items() if q == query_id and g > 0}


def ndcg_at_k(ranked_doc_ids: list[str], positives: set[str], k: int = NDCG_CUTOFF) -> float:
    """Binary nDCG@k with 1/log2(i+1) discount; ideal puts positives first."""
    if k < 1:
        raise DocfunnelError("k must be >= 1")
    if not positives:
        raise NoPositives("query has no relevant document")
    dcg = 0.0
    for i, doc_id in enumerate(ranked_doc_ids[:k], start=1):
        if doc_id in positives:
            dcg += 1.0 / math.log2(i + 1)
    ideal = 0.0
    for i in range(1, min(len(positives), k) + 1):
        ideal += 1.0 / math.log2(i + 1)
    return dcg / ideal


@dataclass
class QueryDiagnostic:
    query_id: str
    result_count: int
    ndcg: float | None
    error: str | None = None


@dataclass
class RunResult:
    strategy: str
    ndcg_at_10: float
    empty_result_rate: float
    query_count: int
    diagnostics: list[QueryDiagnostic] = field(default_factory=list)
    ranked_lists: dict[str, list[str]] = field(default_factory=dict)

    def summary_record(self) -> dict:
        return {
            "strategy": self.strategy,
            "ndcg_at_10": self.ndcg_at_10,
            "empty_result_rate": self.empty_result_rate,
            "query_count": self.query_count,
        }


def evaluate_run(
    index_set: IndexSet,
    queries: QuerySet,
    qrels: Qrels,
    strategy: str,
    ontology: Ontology | None = None,
    lexicon: dict[str, list[str]] | None = None,
    depth: int = RETRIEVAL_DEPTH,
    cutoff: int = NDCG_CUTOFF,
) -> RunResult:
    """Evaluate one strategy over a query set.

    Zero-result queries score nDCG 0 and count toward the empty-result rate;
    per-query failures are recorded as diagnostics without aborting the run.
    """
    diagnostics: list[QueryDiagnostic] = []
    ranked_lists: dict[str, list[str]] = {}
    ndcgs: list[float] = []
    empty = 0
    evaluated = 0
    for query_id, text in queries.queries:
        try:
            plan = build_query_plan(text, strategy, ontology=ontology, lexicon=lexicon)
            ranked = execute_query_plan(plan, index_set, k=depth)
            doc_ids = [r.doc_id for r in ranked]
            ranked_lists[query_id] = doc_ids
            evaluated += 1
            if not doc_ids:
                empty += 1
            score = (
                0.0
                if not doc_ids
                else ndcg_at_k(doc_ids, qrels.positives(query_id), k=cutoff)
            )
            ndcgs.append(score)
            diagnostics.append(
                QueryDiagnostic(query_id=query_id, result_count=len(doc_ids), ndcg=score)
            )
        except DocfunnelError as exc:
            diagnostics.append(
                QueryDiagnostic(query_id=query_id, result_count=0, ndcg=None, error=str(exc))
            )
    return RunResult(
        strategy=strategy,
        ndcg_at_10=sum(ndcgs) / len(ndcgs) if ndcgs else 0.0,
        empty_result_rate=empty / evaluated if evaluated else 0.0,
        query_count=len(queries),
        diagnostics=diagnostics,
        ranked_lists=ranked_lists,
    )


def load_queries(path: str | Path) -> QuerySet:
    queries = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected query_id<TAB>text: {line!r}", line=lineno)
            queries.append((parts[0], parts[1]))
    return QuerySet(queries=tuple(queries))


def load_qrels(path: str | Path) -> Qrels:
    grades: dict[tuple[str, str], int] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected query_id<TAB>doc_id<TAB>grade: {line!r}", line=lineno)
            try:
                grade = int(parts[2])
            except ValueError:
                raise ParseError(f"bad grade {parts[2]!r}", line=lineno)
            if grade not in (0, 1):
                raise ParseError(f"grade must be 0 or 1: {grade}", line=lineno)
            grades[(parts[0], parts[1])] = grade
    return Qrels(grades=grades)


def load_mldr_subset(
    queries_path: str | Path, corpus_path: str | Path, qrels_path: str | Path
) -> tuple[QuerySet, Corpus, Qrels, list[str]]:
    """Load a (queries, corpus, qrels) triple; warn on qrels to missing docs."""
    queries = load_queries(queries_path)
    report = load_corpus_file(corpus_path)
    if report.errors:
        first = report.errors[0]
        raise ParseError(f"corpus: {first}", line=first.line)
    qrels = load_qrels(qrels_path)
    warnings = [
        f"qrels references missing doc {doc_id!r} (query {query_id})"
        for (query_id, doc_id) in qrels.grades
        if doc_id not in report.corpus
    ]
    return queries, report.corpus, qrels, warnings


@dataclass(frozen=True)
class StorageParams:
    doc_count: int
    chunks_per_doc: int
    embedding_dim: int
    bytes_per_dim: int
    avg_token_bytes_per_doc: int = 0

    def __post_init__(self):
        for name, value in (
            ("doc_count", self.doc_count),
            ("chunks_per_doc", self.chunks_per_doc),
            ("embedding_dim", self.embedding_dim),
            ("bytes_per_dim", self.bytes_per_dim),
            ("avg_token_bytes_per_doc", self.avg_token_bytes_per_doc),
        ):
            if value < 0:
                raise DocfunnelError(f"{name} must be >= 0")


def estimate_storage(p: StorageParams) -> tuple[int, int]:
    """(dense bytes, sparse bytes) for a corpus under chunked embeddings.

    Dense storage pays chunks x embedding size on top of the token text a
    sparse index stores anyway.
    """
    tokens = p.doc_count * p.avg_token_bytes_per_doc
    dense = p.doc_count * p.chunks_per_doc * p.embedding_dim * p.bytes_per_dim + tokens
    return dense, tokens
