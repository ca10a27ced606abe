"""In-document question answering over an in-memory chunk index.

One document, one question: sparse BM25 and multihop dense retrieval feed a
reciprocal-rank fusion; a pair-scorer reorders the fused candidates; an
extractive head picks answer sentences; hop selections become a structured
reasoning chain; and the fused list is packed into a generation context with
the best chunks at both ends. Every stage appends one trace event.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analysis import STANDARD, analyze, tokenize_with_spans
from .corpus import Chunk, ChunkPolicy, Document, chunk_document
from .embed import BadResponse, Embedder, EmbeddingTimeout, EmbeddingVector, cosine_similarity
from .errors import DocfunnelError, EmbeddingFailure, ScorerFailure
from .sparse import FieldIndex, bm25_score
from .trace import Trace

K_RRF_DEFAULT = 60.0

# A pair-scorer maps (question, chunk texts) to one score per text.
PairScorer = Callable[[str, list[str]], list[float]]
# An extractive head maps (question, passages found by the default splitter)
# to a reordered/filtered passage list.
ExtractiveHead = Callable[[str, list["Passage"]], list["Passage"]]


@dataclass(frozen=True)
class QAConfig:
    hops: int = 3
    per_hop: int = 5
    alpha: float = 0.5  # blend of the original question vector across hops
    k_rrf: float = K_RRF_DEFAULT
    sparse_m: int = 10
    top_passages: int = 5
    budget_tokens: int = 1024
    use_reranker: bool = True

    def __post_init__(self):
        if self.hops < 1:
            raise DocfunnelError("hops must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise DocfunnelError("alpha must be in [0, 1]")
        if self.budget_tokens < 1:
            raise DocfunnelError("budget_tokens must be >= 1")


class ChunkIndex:
    """Immutable per-document index: chunks, sparse stats, embeddings."""

    def __init__(self, doc: Document, chunks: list[Chunk], embeddings: list[EmbeddingVector],
                 embedder: Embedder):
        if len(chunks) != len(embeddings):
            raise DocfunnelError("one embedding per chunk required")
        self.doc = doc
        self.chunks = chunks
        self.embeddings = embeddings
        self.embedder = embedder
        self.field_index = FieldIndex(field_name="chunk", config=STANDARD)
        for chunk in chunks:
            self.field_index.add_document(chunk.chunk_id, chunk.text)

    def __len__(self) -> int:
        return len(self.chunks)

    def chunk(self, chunk_id: int) -> Chunk:
        return self.chunks[chunk_id]

    def idf(self, term: str) -> float:
        n = self.field_index.doc_count
        df = self.field_index.document_frequency(term)
        return float(np.log(1 + (n - df + 0.5) / (df + 0.5))) if n else 0.0


def build_chunk_index(
    doc: Document,
    embedder: Embedder | None = None,
    policy: ChunkPolicy = ChunkPolicy(),
) -> ChunkIndex:
    """Chunk a document and embed every chunk in one batch."""
    embedder = embedder or Embedder()
    chunks = chunk_document(doc, policy)
    try:
        embeddings = embedder.embed_batch([c.text for c in chunks])
    except (EmbeddingTimeout, BadResponse) as exc:
        raise EmbeddingFailure(str(exc)) from exc
    return ChunkIndex(doc, chunks, embeddings, embedder)


@dataclass(frozen=True)
class RankedChunk:
    chunk_id: int
    score: float
    rank: int


def sparse_chunk_search(
    question: str, index: ChunkIndex, m: int = 10, trace: Trace | None = None
) -> list[RankedChunk]:
    """BM25 top-m chunks; chunks sharing no token with the question are out."""
    tokens = analyze(question, STANDARD)
    scored = []
    for chunk in index.chunks:
        s = bm25_score(tokens, chunk.chunk_id, index.field_index)
        if s > 0:
            scored.append((s, chunk.chunk_id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    ranked = [
        RankedChunk(chunk_id=cid, score=s, rank=i + 1)
        for i, (s, cid) in enumerate(scored[:m])
    ]
    if trace is not None:
        trace.add(
            "sparse",
            {"m": m, "results": [{"rank": r.rank, "chunk_id": r.chunk_id, "score": r.score}
                                 for r in ranked]},
        )
    return ranked


@dataclass(frozen=True)
class HopResult:
    hop: int
    query_vector: EmbeddingVector
    selected: tuple[tuple[int, float], ...]  # (chunk_id, cosine) pairs


def multihop_dense_search(
    question: str,
    index: ChunkIndex,
    hops: int = 3,
    per_hop: int = 5,
    alpha: float = 0.5,
    trace: Trace | None = None,
) -> list[HopResult]:
    """Iterative dense retrieval; each hop excludes earlier selections.

    The next hop's query blends the original question vector with the
    centroid of the current hop's selections, bounding topic drift while
    letting shared vocabulary pull in lexically unrelated chunks.
    """
    v1 = index.embedder.embed(question)
    results: list[HopResult] = []
    consumed: set[int] = set()
    v = v1
    for hop in range(1, hops + 1):
        scored = [
            (cosine_similarity(v, index.embeddings[c.chunk_id]), c.chunk_id)
            for c in index.chunks
            if c.chunk_id not in consumed
        ]
        if not scored:
            break
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        selected = tuple((cid, s) for s, cid in scored[:per_hop])
        consumed.update(cid for cid, _ in selected)
        results.append(HopResult(hop=hop, query_vector=v, selected=selected))
        if trace is not None:
            trace.add(
                f"dense-hop-{hop}",
                {"selected": [{"chunk_id": cid, "score": s} for cid, s in selected]},
            )
        if hop < hops and selected:
            centroid = np.mean(
                [index.embeddings[cid].values for cid, _ in selected], axis=0
            )
            blended = alpha * v1.values + (1 - alpha) * centroid
            norm = float(np.linalg.norm(blended))
            v = (
                EmbeddingVector(values=blended / norm)
                if norm > 0
                else EmbeddingVector(values=blended, is_zero=True)
            )
    return results


def dense_ranking(hop_results: list[HopResult]) -> list[int]:
    """Hop selections flattened into one ranked list, hop by hop."""
    return [cid for hop in hop_results for cid, _ in hop.selected]


@dataclass(frozen=True)
class FusionEntry:
    chunk_id: int
    score: float
    sparse_rank: int | None = None
    dense_rank: int | None = None


@dataclass(frozen=True)
class FusionResult:
    entries: tuple[FusionEntry, ...]

    def order(self) -> list[int]:
        return [e.chunk_id for e in self.entries]


def fuse_rrf(
    lists: list[tuple[str, list[int]]],
    k_rrf: float = K_RRF_DEFAULT,
    trace: Trace | None = None,
) -> FusionResult:
    """Reciprocal rank fusion of labeled ranked lists (ranks are 1-based).

    score(c) = sum over lists containing c of 1/(k_rrf + rank); descending,
    ties by ascending chunk_id.
    """
    if not lists:
        raise DocfunnelError("fuse_rrf needs at least one list")
    scores: dict[int, float] = {}
    ranks: dict[str, dict[int, int]] = {}
    for label, ranked in lists:
        ranks[label] = {}
        for position, cid in enumerate(ranked, start=1):
            if cid in ranks[label]:
                continue
            ranks[label][cid] = position
            scores[cid] = scores.get(cid, 0.0) + 1.0 / (k_rrf + position)
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    entries = tuple(
        FusionEntry(
            chunk_id=cid,
            score=score,
            sparse_rank=ranks.get("sparse", {}).get(cid),
            dense_rank=ranks.get("dense", {}).get(cid),
        )
        for cid, score in ordered
    )
    if trace is not None:
        trace.add(
            "fusion",
            {
                "k_rrf": k_rrf,
                "entries": [
                    {
                        "chunk_id": e.chunk_id,
                        "score": e.score,
                        "sparse_rank": e.sparse_rank,
                        "dense_rank": e.dense_rank,
                    }
                    for e in entries
                ],
            },
        )
    return FusionResult(entries=entries)


def reorder_lost_in_middle(ranked: list) -> list:
    """Odd ranks ascending, then even ranks descending.

    Puts rank 1 first and rank 2 last so the strongest evidence sits at the
    context edges where generative readers attend most.
    """
    odds = ranked[0::2]
    evens = ranked[1::2]
    return odds + evens[::-1]


def lexical_overlap_scorer(index: ChunkIndex) -> PairScorer:
    """Default pair-scorer: IDF-weighted overlap of question terms, in [0, 1]."""

    def score(question: str, texts: list[str]) -> list[float]:
        q_terms = sorted(set(analyze(question, STANDARD)))
        denom = sum(index.idf(t) for t in q_terms)
        out = []
        for text in texts:
            if denom == 0:
                out.append(0.0)
                continue
            present = set(analyze(text, STANDARD))
            out.append(sum(index.idf(t) for t in q_terms if t in present) / denom)
        return out

    return score


def rerank(
    question: str,
    candidates: list[int],
    index: ChunkIndex,
    scorer: PairScorer | None = None,
    trace: Trace | None = None,
) -> list[RankedChunk]:
    """Stable reorder of candidate chunks by a pluggable pair-scorer."""
    if not candidates:
        raise DocfunnelError("rerank requires at least one candidate")
    scorer = scorer or lexical_overlap_scorer(index)
    texts = [index.chunk(cid).text for cid in candidates]
    try:
        scores = scorer(question, texts)
    except Exception as exc:
        raise ScorerFailure(f"pair-scorer raised: {exc}") from exc
    if len(scores) != len(candidates):
        raise ScorerFailure(
            f"pair-scorer returned {len(scores)} scores for {len(candidates)} candidates"
        )
    order = sorted(range(len(candidates)), key=lambda i: -scores[i])  # stable: ties keep input order
    ranked = [
        RankedChunk(chunk_id=candidates[i], score=float(scores[i]), rank=pos + 1)
        for pos, i in enumerate(order)
    ]
    if trace is not None:
        trace.add(
            "rerank",
            {"results": [{"rank": r.rank, "chunk_id": r.chunk_id, "score": r.score}
                         for r in ranked]},
        )
    return ranked


@dataclass(frozen=True)
class Passage:
    chunk_id: int
    start: int
    end: int
    text: str
    score: float
    rank: int


_SENTENCE_BREAK = re.compile(r"[.!?]+|\n")


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Sentence char spans (trimmed, delimiter included except newlines)."""
    spans = []
    last = 0
    for m in _SENTENCE_BREAK.finditer(text):
        spans.append((last, m.end() if m.group(0) != "\n" else m.start()))
        last = m.end()
    if last < len(text):
        spans.append((last, len(text)))
    trimmed = []
    for start, end in spans:
        piece = text[start:end]
        lead = len(piece) - len(piece.lstrip())
        tail = len(piece) - len(piece.rstrip())
        if start + lead < end - tail:
            trimmed.append((start + lead, end - tail))
    return trimmed


def extract_passages(
    question: str,
    ranked_chunks: list[int],
    index: ChunkIndex,
    top_p: int = 5,
    head: ExtractiveHead | None = None,
    trace: Trace | None = None,
) -> list[Passage]:
    """Pick the top answer sentences across chunks by summed question-term IDF.

    Sentences sharing no question term score 0 and are dropped; ties go to
    the earlier chunk, then the earlier offset.
    """
    q_terms = sorted(set(analyze(question, STANDARD)))
    candidates: list[tuple[float, int, int, int]] = []  # (score, chunk_id, start, end)
    for cid in ranked_chunks:
        text = index.chunk(cid).text
        for start, end in split_sentences(text):
            present = set(analyze(text[start:end], STANDARD))
            score = sum(index.idf(t) for t in q_terms if t in present)
            if score > 0:
                candidates.append((score, cid, start, end))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    passages = [
        Passage(
            chunk_id=cid,
            start=start,
            end=end,
            text=index.chunk(cid).text[start:end],
            score=score,
            rank=i + 1,
        )
        for i, (score, cid, start, end) in enumerate(candidates[:top_p])
    ]
    if head is not None:
        passages = head(question, passages)
    if trace is not None:
        trace.add(
            "extract",
            {
                "results": [
                    {"rank": p.rank, "chunk_id": p.chunk_id, "start": p.start,
                     "end": p.end, "score": p.score}
                    for p in passages
                ]
            },
        )
    return passages


@dataclass(frozen=True)
class ChainStep:
    hop: int
    evidence: tuple[tuple[int, float, str], ...]  # (chunk_id, score, excerpt)


EXCERPT_CHARS = 280


def assemble_reasoning_chain(
    hop_results: list[HopResult],
    passages: list[Passage],
    index: ChunkIndex,
    trace: Trace | None = None,
) -> list[ChainStep]:
    """One step per hop, in hop order; empty hops never produce a step.

    A chunk's excerpt prefers its best extracted passage, falling back to the
    chunk head, so the chain hands a generator the most answer-bearing text.
    """
    best_passage: dict[int, Passage] = {}
    for p in passages:
        if p.chunk_id not in best_passage:
            best_passage[p.chunk_id] = p
    steps = []
    for hop in hop_results:
        if not hop.selected:
            continue
        evidence = []
        for cid, score in hop.selected:
            source = best_passage[cid].text if cid in best_passage else index.chunk(cid).text
            evidence.append((cid, score, source[:EXCERPT_CHARS]))
        steps.append(ChainStep(hop=hop.hop, evidence=tuple(evidence)))
    if trace is not None:
        trace.add(
            "chain",
            {
                "steps": [
                    {
                        "hop": s.hop,
                        "evidence": [
                            {"chunk_id": cid, "score": score, "excerpt": excerpt}
                            for cid, score, excerpt in s.evidence
                        ],
                    }
                    for s in steps
                ]
            },
        )
    return steps


@dataclass(frozen=True)
class ContextPack:
    chunk_ids: tuple[int, ...]
    texts: tuple[str, ...]
    total_tokens: int


def _truncate_to_tokens(text: str, budget: int) -> tuple[str, int]:
    spans = tokenize_with_spans(text)
    if len(spans) <= budget:
        return text, len(spans)
    return text[: spans[budget - 1][2]], budget


def pack_context(
    fused: FusionResult,
    index: ChunkIndex,
    budget_tokens: int,
    trace: Trace | None = None,
) -> ContextPack:
    """Fill the token budget in fused order, then spread the best to the ends.

    Chunks that do not fit the remaining budget are skipped; if not even the
    best chunk fits, it is truncated to the budget so the pack is never empty.
    """
    if budget_tokens < 1:
        raise DocfunnelError("budget_tokens must be >= 1")
    picked: list[tuple[int, str, int]] = []
    remaining = budget_tokens
    for entry in fused.entries:
        chunk = index.chunk(entry.chunk_id)
        if chunk.token_count <= remaining:
            picked.append((entry.chunk_id, chunk.text, chunk.token_count))
            remaining -= chunk.token_count
    if not picked and fused.entries:
        best = index.chunk(fused.entries[0].chunk_id)
        text, used = _truncate_to_tokens(best.text, budget_tokens)
        picked = [(best.chunk_id, text, used)]
    ordered = reorder_lost_in_middle(picked)
    pack = ContextPack(
        chunk_ids=tuple(cid for cid, _, _ in ordered),
        texts=tuple(text for _, text, _ in ordered),
        total_tokens=sum(n for _, _, n in ordered),
    )
    if trace is not None:
        trace.add(
            "pack",
            {"budget": budget_tokens, "total_tokens": pack.total_tokens,
             "chunk_ids": list(pack.chunk_ids)},
        )
    return pack


@dataclass
class AnswerBundle:
    question: str
    passages: list[Passage]
    chain: list[ChainStep]
    context: ContextPack
    trace: Trace = field(default_factory=Trace)

    def to_record(self) -> dict:
        return {
            "question": self.question,
            "passages": [
                {"chunk_id": p.chunk_id, "start": p.start, "end": p.end,
                 "text": p.text, "score": p.score}
                for p in self.passages
            ],
            "chain": [
                {
                    "hop": s.hop,
                    "evidence": [
                        {"chunk_id": cid, "score": score, "excerpt": excerpt}
                        for cid, score, excerpt in s.evidence
                    ],
                }
                for s in self.chain
            ],
            "context": list(self.context.chunk_ids),
            "trace": self.trace.to_records(),
        }


def answer_question(
    index: ChunkIndex,
    question: str,
    config: QAConfig = QAConfig(),
    scorer: PairScorer | None = None,
    head: ExtractiveHead | None = None,
) -> AnswerBundle:
    """Run the full pipeline over a prebuilt chunk index."""
    trace = Trace()
    trace.add(
        "chunking",
        {
            "doc_id": index.doc.id,
            "chunks": [
                {"chunk_id": c.chunk_id, "source_field": c.source_field,
                 "tokens": c.token_count}
                for c in index.chunks
            ],
        },
    )
    sparse = sparse_chunk_search(question, index, m=config.sparse_m, trace=trace)
    hops = multihop_dense_search(
        question, index, hops=config.hops, per_hop=config.per_hop,
        alpha=config.alpha, trace=trace,
    )
    fused = fuse_rrf(
        [("sparse", [r.chunk_id for r in sparse]), ("dense", dense_ranking(hops))],
        k_rrf=config.k_rrf,
        trace=trace,
    )
    candidates = fused.order()
    if config.use_reranker and candidates:
        reranked = rerank(question, candidates, index, scorer=scorer, trace=trace)
        passage_order = [r.chunk_id for r in reranked]
    else:
        passage_order = candidates
    passages = extract_passages(
        question, passage_order, index, top_p=config.top_passages, head=head, trace=trace
    )
    chain = assemble_reasoning_chain(hops, passages, index, trace=trace)
    pack = pack_context(fused, index, config.budget_tokens, trace=trace)
    return AnswerBundle(
        question=question, passages=passages, chain=chain, context=pack, trace=trace
    )


def render_answer_template(bundle: AnswerBundle) -> str:
    """Default text-generator slot: cite chunks, then quote top passages."""
    if not bundle.passages:
        return "No extractive evidence found."
    refs = ", ".join(f"chunk {cid}" for cid in dict.fromkeys(p.chunk_id for p in bundle.passages))
    quoted = " ".join(p.text for p in bundle.passages)
    return f"Based on [{refs}]: {quoted}"


# re-exported for chunk-policy callers
__all__ = [
    "AnswerBundle",
    "ChainStep",
    "ChunkIndex",
    "ChunkPolicy",
    "ContextPack",
    "FusionEntry",
    "FusionResult",
    "HopResult",
    "Passage",
    "QAConfig",
    "RankedChunk",
    "answer_question",
    "assemble_reasoning_chain",
    "build_chunk_index",
    "dense_ranking",
    "extract_passages",
    "fuse_rrf",
    "lexical_overlap_scorer",
    "multihop_dense_search",
    "pack_context",
    "render_answer_template",
    "reorder_lost_in_middle",
    "rerank",
    "sparse_chunk_search",
    "split_sentences",
]
