"""Fielded inverted index with BM25 scoring and boolean clause execution.

Scoring follows most_fields semantics: a variation's score for a document is
the boosted sum of its per-field BM25 contributions; a clause takes the best
variation (so redundant synonyms never inflate scores); a document's score
sums its clause scores. MUST clauses additionally filter the candidate set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import STANDARD, AnalyzerConfig, analyze
from .corpus import Corpus
from .errors import DocfunnelError, EmptyPlan
from .plan import QueryPlan
from .trace import Trace

K1_DEFAULT = 1.2
B_DEFAULT = 0.75

DEFAULT_FIELD_BOOSTS = {"title": 3.0, "abstract": 2.0, "sections": 1.0}
NGRAM_SUBFIELD_BOOST = 0.3
INDEX_FORMAT = "docfunnel-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float
    rank: int


@dataclass
class FieldIndex:
    """Inverted index over one (field, analyzer) pair."""

    field_name: str
    config: AnalyzerConfig
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    doc_lengths: list[int] = field(default_factory=list)
    doc_count: int = 0  # documents with at least one token in this field
    total_tokens: int = 0
    # lazy term -> {ordinal: tf} lookup; postings stay the canonical store
    _tf_maps: dict[str, dict[int, int]] = field(default_factory=dict, repr=False)

    @property
    def key(self) -> str:
        return self.field_name if self.config.kind == "standard" else (
            f"{self.field_name}.{self.config.key()}"
        )

    @property
    def avg_length(self) -> float:
        return self.total_tokens / self.doc_count if self.doc_count else 0.0

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def add_document(self, ordinal: int, text: str) -> None:
        if ordinal != len(self.doc_lengths):
            raise DocfunnelError("documents must be added in ordinal order")
        tokens = analyze(text, self.config)
        self.doc_lengths.append(len(tokens))
        if not tokens:
            return
        self.doc_count += 1
        self.total_tokens += len(tokens)
        freqs: dict[str, int] = {}
        for t in tokens:
            freqs[t] = freqs.get(t, 0) + 1
        for t, tf in freqs.items():
            self.postings.setdefault(t, []).append((ordinal, tf))

    def term_frequency(self, term: str, ordinal: int) -> int:
        tf_map = self._tf_maps.get(term)
        if tf_map is None:
            tf_map = dict(self.postings.get(term, ()))
            self._tf_maps[term] = tf_map
        return tf_map.get(ordinal, 0)


def bm25_score(
    query_tokens: list[str],
    ordinal: int,
    index: FieldIndex,
    k1: float = K1_DEFAULT,
    b: float = B_DEFAULT,
) -> float:
    """Non-negative-IDF BM25 of a token list against one document field.

    idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)) over the documents that carry
    this field; returns 0 when no query token occurs in the document.
    """
    n = index.doc_count
    if n == 0 or not query_tokens:
        return 0.0
    length = index.doc_lengths[ordinal] if ordinal < len(index.doc_lengths) else 0
    if length == 0:
        return 0.0
    norm = k1 * (1 - b + b * length / index.avg_length)
    score = 0.0
    for t in query_tokens:
        tf = index.term_frequency(t, ordinal)
        if tf == 0:
            continue
        df = index.document_frequency(t)
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        score += idf * tf * (k1 + 1) / (tf + norm)
    return score


class IndexSet:
    """All field indexes of one sealed corpus plus its field boosts.

    Immutable once built; queries are stateless and may run concurrently.
    """

    def __init__(
        self,
        doc_ids: list[str],
        indexes: dict[str, FieldIndex],
        field_boosts: dict[str, float],
        corpus: Corpus | None = None,
    ):
        self.doc_ids = list(doc_ids)
        self.indexes = dict(indexes)
        self.field_boosts = dict(field_boosts)
        self.corpus = corpus
        self._ordinals = {d: i for i, d in enumerate(self.doc_ids)}

    def ordinal(self, doc_id: str) -> int:
        return self._ordinals[doc_id]

    def ordered_indexes(self) -> list[FieldIndex]:
        # canonical key order keeps float accumulation bitwise-stable
        # whether the index was freshly built or loaded from disk
        return [self.indexes[k] for k in sorted(self.indexes)]

    def standard_indexes(self) -> list[FieldIndex]:
        return [ix for ix in self.ordered_indexes() if ix.config.kind == "standard"]

    def boost_for(self, index: FieldIndex) -> float:
        base = self.field_boosts.get(index.field_name, 1.0)
        if index.config.kind == "ngram":
            return base * NGRAM_SUBFIELD_BOOST
        return base


def build_index(
    corpus: Corpus,
    field_configs: dict[str, list[AnalyzerConfig]] | None = None,
    field_boosts: dict[str, float] | None = None,
) -> IndexSet:
    """Index a sealed corpus: one FieldIndex per (field, analyzer) pair."""
    if not corpus.sealed:
        raise DocfunnelError("corpus must be sealed before indexing")
    if field_configs is None:
        field_configs = {
            name: [STANDARD, AnalyzerConfig(kind="ngram", ngram_size=3)]
            for name in ("title", "abstract", "sections")
        }
    boosts = dict(DEFAULT_FIELD_BOOSTS if field_boosts is None else field_boosts)
    indexes: dict[str, FieldIndex] = {}
    for fieldname, configs in field_configs.items():
        for config in configs:
            fi = FieldIndex(field_name=fieldname, config=config)
            for ordinal, doc_id in enumerate(corpus.doc_ids()):
                fi.add_document(ordinal, corpus.field_text(doc_id, fieldname))
            indexes[fi.key] = fi
    return IndexSet(corpus.doc_ids(), indexes, boosts, corpus=corpus)


def _variation_match_set(index_set: IndexSet, text: str) -> set[int]:
    """Ordinals of documents containing >=1 standard token of `text`.

    Matching consults standard subfields only; n-gram subfields contribute
    score, never membership.
    """
    matched: set[int] = set()
    for ix in index_set.standard_indexes():
        tokens = analyze(text, ix.config)
        for t in set(tokens):
            matched.update(doc for doc, _ in ix.postings.get(t, ()))
    return matched


def _variation_scorer(index_set: IndexSet, text: str, k1: float, b: float):
    """Per-variation closure with tokens pre-analyzed for every subfield."""
    prepared = []
    for ix in index_set.ordered_indexes():
        tokens = analyze(text, ix.config)
        if tokens:
            prepared.append((index_set.boost_for(ix), tokens, ix))

    def score(ordinal: int) -> float:
        total = 0.0
        for boost, tokens, ix in prepared:
            s = bm25_score(tokens, ordinal, ix, k1, b)
            if s:
                total += boost * s
        return total

    return score


def execute_query_plan(
    plan: QueryPlan,
    index_set: IndexSet,
    k: int = 10,
    k1: float = K1_DEFAULT,
    b: float = B_DEFAULT,
    trace: Trace | None = None,
) -> list[ScoredDoc]:
    """Run a clause tree against the index and return the top-k documents.

    Candidates must match every MUST clause (>=1 variation each) when MUST
    clauses exist, otherwise >=1 SHOULD variation; SHOULD clauses never
    filter. Ties break by ascending doc_id for reproducible rankings.
    """
    if plan.empty:
        raise EmptyPlan("query plan has no clauses")
    if k < 1:
        raise DocfunnelError("k must be >= 1")

    if plan.must_clauses:
        candidates: set[int] | None = None
        for clause in plan.must_clauses:
            clause_match: set[int] = set()
            for v in clause.variations:
                clause_match |= _variation_match_set(index_set, v.text)
            candidates = clause_match if candidates is None else candidates & clause_match
        assert candidates is not None
    else:
        candidates = set()
        for clause in plan.should_clauses:
            for v in clause.variations:
                candidates |= _variation_match_set(index_set, v.text)

    clauses = [
        (clause.boost, [(v.weight, _variation_scorer(index_set, v.text, k1, b))
                        for v in clause.variations])
        for clause in (*plan.must_clauses, *plan.should_clauses)
    ]
    scored: list[tuple[float, str]] = []
    for ordinal in candidates:
        total = 0.0
        for boost, variations in clauses:
            best = 0.0
            for weight, scorer in variations:
                s = weight * scorer(ordinal)
                if s > best:
                    best = s
            total += boost * best
        scored.append((total, index_set.doc_ids[ordinal]))

    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    ranked = [
        ScoredDoc(doc_id=doc_id, score=score, rank=i + 1)
        for i, (score, doc_id) in enumerate(scored[:k])
    ]
    if trace is not None:
        trace.add(
            "retrieve",
            {
                "k": k,
                "candidates": len(candidates),
                "results": [
                    {"rank": r.rank, "doc_id": r.doc_id, "score": r.score} for r in ranked
                ],
            },
        )
    return ranked


def save_index(index_set: IndexSet, path: str | Path) -> None:
    """Persist an index as one self-describing line-delimited file."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "doc_ids": index_set.doc_ids,
            "field_boosts": index_set.field_boosts,
        }
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for key in sorted(index_set.indexes):
            ix = index_set.indexes[key]
            rec = {
                "index": key,
                "field": ix.field_name,
                "analyzer": ix.config.to_record(),
                "doc_count": ix.doc_count,
                "total_tokens": ix.total_tokens,
                "doc_lengths": ix.doc_lengths,
                "postings": {t: ix.postings[t] for t in sorted(ix.postings)},
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_index(path: str | Path, corpus: Corpus | None = None) -> IndexSet:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != INDEX_FORMAT:
            raise DocfunnelError(f"not a {INDEX_FORMAT} file: {path}")
        if header.get("version") != INDEX_VERSION:
            raise DocfunnelError(f"unsupported index version: {header.get('version')}")
        indexes: dict[str, FieldIndex] = {}
        for line in fh:
            rec = json.loads(line)
            fi = FieldIndex(
                field_name=rec["field"],
                config=AnalyzerConfig.from_record(rec["analyzer"]),
                postings={
                    t: [(int(d), int(tf)) for d, tf in entries]
                    for t, entries in rec["postings"].items()
                },
                doc_lengths=[int(x) for x in rec["doc_lengths"]],
                doc_count=rec["doc_count"],
                total_tokens=rec["total_tokens"],
            )
            indexes[rec["index"]] = fi
    return IndexSet(header["doc_ids"], indexes, header["field_boosts"], corpus=corpus)
