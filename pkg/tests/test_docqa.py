import itertools
import json

import numpy as np
import pytest

from docfunnel.analysis import token_count
from docfunnel.corpus import ChunkPolicy
from docfunnel.docqa import (
    QAConfig,
    answer_question,
    assemble_reasoning_chain,
    build_chunk_index,
    dense_ranking,
    extract_passages,
    fuse_rrf,
    multihop_dense_search,
    pack_context,
    render_answer_template,
    reorder_lost_in_middle,
    rerank,
    sparse_chunk_search,
    split_sentences,
)
from docfunnel.embed import Embedder, EmbedderConfig, cosine_similarity, embed_text
from docfunnel.errors import DocfunnelError, EmbeddingFailure, ScorerFailure
from docfunnel.trace import Trace

from conftest import make_doc


@pytest.fixture
def doc6():
    return make_doc(
        "doc",
        title="Aspirin and clotting",
        abstract="Aspirin reduces clot formation in arteries.",
        sections=[
            ("Mechanism", "Platelet aggregation is inhibited by aspirin."),
            ("Dosage", "Low doses are taken daily by patients."),
            ("Risks", "Bleeding risk increases with higher doses."),
            ("History", "Willow bark extracts were early remedies."),
        ],
    )


@pytest.fixture
def index6(doc6):
    return build_chunk_index(doc6)


def test_build_chunk_index_cardinality(index6):
    assert len(index6) == 6
    assert len(index6.embeddings) == 6


def test_build_chunk_index_title_only():
    index = build_chunk_index(make_doc("t", title="just a title"))
    assert len(index) == 1


def test_build_chunk_index_embedding_failure(doc6):
    failing = Embedder(
        EmbedderConfig(kind="remote", endpoint="http://127.0.0.1:1", timeout=0.1)
    )
    with pytest.raises(EmbeddingFailure):
        build_chunk_index(doc6, failing)


def test_sparse_chunk_search_single_match(index6):
    ranked = sparse_chunk_search("platelet aggregation", index6, m=5)
    assert ranked[0].chunk_id == 2  # the Mechanism section chunk
    assert ranked[0].rank == 1


def test_sparse_chunk_search_no_match(index6):
    assert sparse_chunk_search("zzz qqq", index6, m=5) == []


def test_sparse_chunk_search_m_above_count(index6):
    ranked = sparse_chunk_search("aspirin doses daily", index6, m=50)
    assert len(ranked) <= 6


# --- multihop ---


def test_single_hop_equals_plain_dense(index6):
    question = "aspirin dosage"
    hops = multihop_dense_search(question, index6, hops=1, per_hop=3)
    v = index6.embedder.embed(question)
    expected = sorted(
        ((cosine_similarity(v, e), c.chunk_id) for c, e in zip(index6.chunks, index6.embeddings)),
        key=lambda p: (-p[0], p[1]),
    )[:3]
    assert [cid for cid, _ in hops[0].selected] == [cid for _, cid in expected]


def test_alpha_one_partitions_dense_ranking(index6):
    question = "aspirin dosage"
    hops = multihop_dense_search(question, index6, hops=3, per_hop=2, alpha=1.0)
    v = index6.embedder.embed(question)
    full = sorted(
        ((cosine_similarity(v, e), c.chunk_id) for c, e in zip(index6.chunks, index6.embeddings)),
        key=lambda p: (-p[0], p[1]),
    )
    flat = [cid for hop in hops for cid, _ in hop.selected]
    assert flat == [cid for _, cid in full[: len(flat)]]


def test_hop_disjointness(index6):
    hops = multihop_dense_search("aspirin risk", index6, hops=3, per_hop=2)
    seen = set()
    for hop in hops:
        ids = {cid for cid, _ in hop.selected}
        assert not ids & seen
        seen |= ids


def test_early_stop_when_exhausted(index6):
    hops = multihop_dense_search("aspirin", index6, hops=5, per_hop=4)
    assert sum(len(h.selected) for h in hops) == 6
    assert len(hops) == 2  # 4 + 2, then nothing left


def test_vocabulary_chain_pulls_in_unrelated_chunk():
    doc = make_doc(
        "chain",
        sections=[
            ("a", "alpha beta gamma delta"),
            ("b", "delta epsilon zeta"),
            ("c", "omicron sigma tau"),
        ],
    )
    index = build_chunk_index(doc)
    question = "alpha beta gamma"
    hops = multihop_dense_search(question, index, hops=2, per_hop=1, alpha=0.5)
    assert [cid for cid, _ in hops[0].selected] == [0]

    # brute-force the hop-2 query vector from scratch
    v1 = embed_text(question)
    blended = 0.5 * v1.values + 0.5 * index.embeddings[0].values
    blended = blended / np.linalg.norm(blended)
    from docfunnel.embed import EmbeddingVector

    v2 = EmbeddingVector(values=blended)
    sims = {
        cid: cosine_similarity(v2, index.embeddings[cid]) for cid in (1, 2)
    }
    assert sims[1] > sims[2]  # shares "delta" with the hop-1 chunk
    assert [cid for cid, _ in hops[1].selected] == [1]


# --- fusion ---


def rrf_oracle(lists, k):
    scores = {}
    for ranked in lists:
        for rank, item in enumerate(ranked, start=1):
            scores[item] = scores.get(item, 0.0) + 1.0 / (k + rank)
    return sorted(scores, key=lambda c: (-scores[c], c)), scores


def test_fuse_rrf_hand_arithmetic():
    result = fuse_rrf([("sparse", [0, 1]), ("dense", [1, 2])], k_rrf=60)
    by_id = {e.chunk_id: e for e in result.entries}
    assert by_id[0].score == pytest.approx(1 / 61, abs=1e-12)
    assert by_id[1].score == pytest.approx(1 / 62 + 1 / 61, abs=1e-12)
    assert by_id[2].score == pytest.approx(1 / 62, abs=1e-12)
    assert result.order() == [1, 0, 2]
    assert by_id[1].sparse_rank == 2 and by_id[1].dense_rank == 1
    assert by_id[0].dense_rank is None


def test_fuse_rrf_single_list_preserves_order():
    result = fuse_rrf([("sparse", [5, 3, 9])])
    assert result.order() == [5, 3, 9]


def test_fuse_rrf_identical_lists_double_scores():
    once = fuse_rrf([("sparse", [1, 2, 3])])
    twice = fuse_rrf([("sparse", [1, 2, 3]), ("dense", [1, 2, 3])])
    assert twice.order() == once.order()
    for a, b in zip(once.entries, twice.entries):
        assert b.score == pytest.approx(2 * a.score, abs=1e-12)


def test_fuse_rrf_exhaustive_oracle():
    symbols = [0, 1, 2, 3]
    lists = []
    for n in range(0, 5):
        lists.extend(itertools.permutations(symbols, n))
    for l1 in lists:
        for l2 in lists:
            if not l1 and not l2:
                continue
            expected_order, expected_scores = rrf_oracle([l1, l2], 60.0)
            result = fuse_rrf([("sparse", list(l1)), ("dense", list(l2))], k_rrf=60.0)
            assert result.order() == expected_order
            for e in result.entries:
                assert e.score == pytest.approx(expected_scores[e.chunk_id], abs=1e-12)


# --- lost in the middle ---


def test_reorder_examples():
    assert reorder_lost_in_middle(["r1", "r2", "r3", "r4", "r5"]) == [
        "r1", "r3", "r5", "r4", "r2",
    ]
    assert reorder_lost_in_middle(["r1"]) == ["r1"]
    assert reorder_lost_in_middle(["r1", "r2"]) == ["r1", "r2"]
    assert reorder_lost_in_middle([]) == []


def test_reorder_permutation_properties():
    for n in range(1, 51):
        items = list(range(n))
        out = reorder_lost_in_middle(items)
        assert sorted(out) == items
        assert out[0] == items[0]
        if n >= 2:
            assert out[-1] == items[1]


# --- rerank ---


def test_rerank_default_scorer_orders_by_overlap(index6):
    candidates = [c.chunk_id for c in index6.chunks]
    ranked = rerank("platelet aggregation inhibited", candidates, index6)
    assert ranked[0].chunk_id == 2
    assert ranked[-1].score <= ranked[0].score


def test_rerank_constant_scorer_keeps_fusion_order(index6):
    candidates = [4, 1, 3, 0]
    ranked = rerank("anything", candidates, index6, scorer=lambda q, ts: [0.5] * len(ts))
    assert [r.chunk_id for r in ranked] == candidates


def test_rerank_scorer_contract(index6):
    with pytest.raises(ScorerFailure):
        rerank("q", [0, 1], index6, scorer=lambda q, ts: [1.0])
    with pytest.raises(ScorerFailure):
        rerank("q", [0, 1], index6, scorer=lambda q, ts: 1 / 0)
    with pytest.raises(DocfunnelError):
        rerank("q", [], index6)


# --- passages ---


def test_split_sentences_offsets():
    text = "First sentence. Second one! Third?\nFourth line"
    for start, end in split_sentences(text):
        assert text[start:end].strip() == text[start:end]
    pieces = [text[s:e] for s, e in split_sentences(text)]
    assert pieces == ["First sentence.", "Second one!", "Third?", "Fourth line"]


def test_extract_passage_with_span(index6):
    passages = extract_passages(
        "platelet aggregation aspirin", [c.chunk_id for c in index6.chunks], index6, top_p=1
    )
    assert len(passages) == 1
    p = passages[0]
    chunk_text = index6.chunk(p.chunk_id).text
    assert chunk_text[p.start : p.end] == p.text
    assert "Platelet aggregation" in p.text


def test_extract_no_evidence_empty(index6):
    assert extract_passages("qqq zzz", [0, 1], index6) == []


def test_extract_tie_breaks_earlier_chunk():
    doc = make_doc(
        "tie",
        sections=[("a", "shared token sentence."), ("b", "shared token sentence.")],
    )
    index = build_chunk_index(doc)
    passages = extract_passages("shared token", [0, 1], index, top_p=1)
    assert passages[0].chunk_id == 0


def test_passage_spans_slice_chunks_exactly(index6):
    passages = extract_passages(
        "aspirin doses bleeding patients", [c.chunk_id for c in index6.chunks], index6
    )
    for p in passages:
        assert index6.chunk(p.chunk_id).text[p.start : p.end].encode() == p.text.encode()


def test_extractive_head_slot(index6):
    def head(question, passages):
        return passages[:1]

    passages = extract_passages(
        "aspirin doses", [c.chunk_id for c in index6.chunks], index6, head=head
    )
    assert len(passages) <= 1


# --- chain ---


def test_chain_structure(index6):
    hops = multihop_dense_search("aspirin dose", index6, hops=3, per_hop=2)
    passages = extract_passages("aspirin dose", [c.chunk_id for c in index6.chunks], index6)
    chain = assemble_reasoning_chain(hops, passages, index6)
    assert len(chain) == len(hops)
    for step, hop in zip(chain, hops):
        assert len(step.evidence) == len(hop.selected)
        for cid, score, excerpt in step.evidence:
            assert len(excerpt) <= 280


def test_chain_single_hop(index6):
    hops = multihop_dense_search("aspirin", index6, hops=1, per_hop=2)
    chain = assemble_reasoning_chain(hops, [], index6)
    assert len(chain) == 1


def test_chain_prefers_passage_excerpt(index6):
    hops = multihop_dense_search("platelet aggregation", index6, hops=1, per_hop=6)
    passages = extract_passages(
        "platelet aggregation", [c.chunk_id for c in index6.chunks], index6, top_p=3
    )
    chain = assemble_reasoning_chain(hops, passages, index6)
    covered = {p.chunk_id: p.text for p in passages}
    for cid, _, excerpt in chain[0].evidence:
        if cid in covered:
            assert excerpt == covered[cid][:280]


# --- packing ---


def _hundred_token_chunk_doc(n_chunks: int):
    sections = []
    for i in range(n_chunks):
        sections.append((f"s{i}", " ".join(f"c{i}w{j}" for j in range(100))))
    return make_doc("pack", sections=sections)


def test_pack_truncates_then_interleaves():
    index = build_chunk_index(_hundred_token_chunk_doc(5))
    fused = fuse_rrf([("sparse", [0, 1, 2, 3, 4])])
    pack = pack_context(fused, index, budget_tokens=300)
    assert pack.chunk_ids == (0, 2, 1)  # f1, f3, f2
    assert pack.total_tokens == 300


def test_pack_budget_exceeds_everything():
    index = build_chunk_index(_hundred_token_chunk_doc(4))
    fused = fuse_rrf([("sparse", [2, 0, 3, 1])])
    pack = pack_context(fused, index, budget_tokens=10_000)
    assert sorted(pack.chunk_ids) == [0, 1, 2, 3]
    assert pack.chunk_ids == (2, 3, 1, 0)  # odd ranks then evens reversed
    assert pack.total_tokens == 400


def test_pack_budget_below_smallest_chunk():
    index = build_chunk_index(_hundred_token_chunk_doc(3))
    fused = fuse_rrf([("sparse", [1, 0, 2])])
    pack = pack_context(fused, index, budget_tokens=7)
    assert pack.chunk_ids == (1,)
    assert pack.total_tokens == 7
    assert token_count(pack.texts[0]) == 7


def test_pack_skips_oversized_keeps_filling():
    doc = make_doc(
        "mixed",
        sections=[
            ("a", " ".join(f"a{i}" for i in range(50))),
            ("b", " ".join(f"b{i}" for i in range(400))),
            ("c", " ".join(f"c{i}" for i in range(50))),
        ],
    )
    index = build_chunk_index(doc)
    fused = fuse_rrf([("sparse", [0, 1, 2])])
    pack = pack_context(fused, index, budget_tokens=120)
    assert set(pack.chunk_ids) == {0, 2}


# --- full pipeline ---


def test_answer_bundle_trace_stages(index6):
    bundle = answer_question(index6, "what dose of aspirin do patients take")
    stages = bundle.trace.stages()
    assert stages[0] == "chunking"
    assert "sparse" in stages
    hop_stages = [s for s in stages if s.startswith("dense-hop-")]
    assert hop_stages == [f"dense-hop-{i}" for i in range(1, len(hop_stages) + 1)]
    tail = stages[stages.index("fusion"):]
    assert tail == ["fusion", "rerank", "extract", "chain", "pack"]
    ordinals = [e.ordinal for e in bundle.trace.events]
    assert ordinals == list(range(1, len(ordinals) + 1))


def test_answer_bundle_without_reranker(index6):
    config = QAConfig(use_reranker=False)
    bundle = answer_question(index6, "aspirin dose", config)
    assert "rerank" not in bundle.trace.stages()


def test_pipeline_deterministic(index6):
    records = [
        json.dumps(
            answer_question(index6, "what dose of aspirin do patients take").to_record(),
            sort_keys=True,
        )
        for _ in range(3)
    ]
    assert records[0] == records[1] == records[2]


def test_bundle_export_schema(index6):
    record = answer_question(index6, "bleeding risk of aspirin").to_record()
    assert set(record) == {"question", "passages", "chain", "context", "trace"}
    for p in record["passages"]:
        assert set(p) == {"chunk_id", "start", "end", "text", "score"}
    for step in record["chain"]:
        assert set(step) == {"hop", "evidence"}
        for ev in step["evidence"]:
            assert set(ev) == {"chunk_id", "score", "excerpt"}
    for event in record["trace"]:
        assert set(event) == {"ordinal", "stage", "payload"}
    assert all(isinstance(c, int) for c in record["context"])


def test_render_answer_template(index6):
    bundle = answer_question(index6, "what dose of aspirin do patients take")
    text = render_answer_template(bundle)
    assert text.startswith("Based on [chunk ")
    empty = answer_question(index6, "zz qq")
    assert render_answer_template(empty) == "No extractive evidence found."


def test_window_chunks_flow_through_pipeline():
    long_text = " ".join(f"w{i} aspirin" if i % 37 == 0 else f"w{i}" for i in range(900))
    doc = make_doc("long", title="Aspirin windows", sections=[("s", long_text)])
    index = build_chunk_index(doc, policy=ChunkPolicy(max_tokens=256, overlap_tokens=32))
    assert len(index) > 2
    bundle = answer_question(index, "aspirin")
    assert bundle.passages or bundle.context.chunk_ids
