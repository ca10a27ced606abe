import math
import random

import pytest

from docfunnel.analysis import STANDARD, AnalyzerConfig, analyze
from docfunnel.errors import DocfunnelError, EmptyPlan
from docfunnel.plan import QueryPlan, Variation, VariationGroup
from docfunnel.sparse import (
    FieldIndex,
    bm25_score,
    build_index,
    execute_query_plan,
    load_index,
    save_index,
)
from docfunnel.trace import Trace

from conftest import title_corpus, title_index


def oracle_bm25(doc_tokens: list[list[str]], query: list[str], idx: int,
                k1: float = 1.2, b: float = 0.75) -> float:
    """From-scratch reference scorer working directly on token lists."""
    with_field = [d for d in doc_tokens if d]
    n = len(with_field)
    tokens = doc_tokens[idx]
    if n == 0 or not tokens:
        return 0.0
    avg = sum(len(d) for d in with_field) / n
    score = 0.0
    for t in query:
        tf = tokens.count(t)
        if tf == 0:
            continue
        df = sum(1 for d in doc_tokens if t in d)
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(tokens) / avg))
    return score


def field_index_from(texts: list[str]) -> FieldIndex:
    fi = FieldIndex(field_name="body", config=STANDARD)
    for i, text in enumerate(texts):
        fi.add_document(i, text)
    return fi


def test_postings_shape():
    fi = field_index_from(["cat sat", "dog sat"])
    assert fi.postings["cat"] == [(0, 1)]
    assert fi.postings["dog"] == [(1, 1)]
    assert fi.postings["sat"] == [(0, 1), (1, 1)]
    assert fi.document_frequency("sat") == 2
    assert fi.avg_length == 2.0


def test_bm25_hand_value():
    fi = field_index_from(["cat sat", "dog sat"])
    score = bm25_score(["cat"], 0, fi, k1=1.2, b=0.75)
    assert score == pytest.approx(math.log(2), abs=1e-12)
    assert bm25_score(["cat"], 1, fi) == 0.0


def test_bm25_absent_token_scores_zero():
    fi = field_index_from(["cat sat", "dog sat"])
    assert bm25_score(["giraffe"], 0, fi) == 0.0
    assert bm25_score(["giraffe"], 1, fi) == 0.0


def test_bm25_symmetry_on_identical_statistics():
    fi = field_index_from(["cat sat", "dog sat"])
    assert bm25_score(["sat"], 0, fi) == bm25_score(["sat"], 1, fi)


def test_bm25_matches_oracle_randomized():
    rng = random.Random(7)
    vocab = [f"w{i}" for i in range(30)]
    for _ in range(200):
        texts = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 12)))
            for _ in range(rng.randint(1, 25))
        ]
        fi = field_index_from(texts)
        doc_tokens = [analyze(t) for t in texts]
        query = [rng.choice(vocab + ["missing"]) for _ in range(rng.randint(1, 4))]
        for idx in range(len(texts)):
            assert bm25_score(query, idx, fi) == pytest.approx(
                oracle_bm25(doc_tokens, query, idx), abs=1e-9
            )


def test_empty_corpus_empty_results():
    index = title_index({})
    plan = QueryPlan(
        should_clauses=(VariationGroup("text", (Variation("anything"),), 1.0),)
    )
    assert execute_query_plan(plan, index, k=5) == []


# --- query plan execution ---


def must_plan(*variation_texts: str) -> QueryPlan:
    return QueryPlan(
        must_clauses=(
            VariationGroup(
                "entity", tuple(Variation(t) for t in variation_texts), 2.0
            ),
        )
    )


def test_must_clause_filters_candidates(aspirin_corpus):
    index = build_index(aspirin_corpus)
    ranked = execute_query_plan(must_plan("aspirin", "acetylsalicylic acid"), index, k=10)
    assert [r.doc_id for r in ranked] == ["d1"]


def test_should_relaxation_superset(aspirin_corpus):
    index = build_index(aspirin_corpus)
    groups = (
        VariationGroup("entity", (Variation("aspirin"), Variation("acetylsalicylic acid")), 2.0),
        VariationGroup("verb", (Variation("monitored"), Variation("measured")), 1.0),
    )
    must_docs = {r.doc_id for r in execute_query_plan(QueryPlan(must_clauses=groups), index, k=10)}
    should_docs = {
        r.doc_id for r in execute_query_plan(QueryPlan(should_clauses=groups), index, k=10)
    }
    assert must_docs < should_docs


def test_variation_matches_on_any_token():
    # multi-token variations follow the OR operator of multi_match clauses:
    # one shared token is enough for candidacy
    index = title_index({"d1": "aspirin dosing", "d3": "citric acid uses"})
    ranked = execute_query_plan(must_plan("aspirin", "acetylsalicylic acid"), index, k=10)
    assert {r.doc_id for r in ranked} == {"d1", "d3"}
    assert ranked[0].doc_id == "d1"  # full-variation match outranks partial


def test_zero_match_should_clause_is_noop(aspirin_corpus):
    index = build_index(aspirin_corpus)
    base = QueryPlan(
        must_clauses=must_plan("aspirin").must_clauses,
        should_clauses=(VariationGroup("verb", (Variation("monitored"),), 1.0),),
    )
    extended = QueryPlan(
        must_clauses=base.must_clauses,
        should_clauses=base.should_clauses
        + (VariationGroup("verb", (Variation("xylophone"),), 1.0),),
    )
    r1 = execute_query_plan(base, index, k=10)
    r2 = execute_query_plan(extended, index, k=10)
    assert [(r.doc_id, r.score) for r in r1] == [(r.doc_id, r.score) for r in r2]


def test_empty_plan_raises():
    index = title_index({"d1": "text"})
    with pytest.raises(EmptyPlan):
        execute_query_plan(QueryPlan(), index)


def test_ranking_deterministic_and_tie_broken_by_doc_id():
    index = title_index({"db": "same text", "da": "same text", "dc": "other words"})
    plan = QueryPlan(should_clauses=(VariationGroup("text", (Variation("same text"),), 1.0),))
    first = execute_query_plan(plan, index, k=10)
    second = execute_query_plan(plan, index, k=10)
    assert [(r.doc_id, r.score, r.rank) for r in first] == [
        (r.doc_id, r.score, r.rank) for r in second
    ]
    assert [r.doc_id for r in first[:2]] == ["da", "db"]
    assert first[0].score == first[1].score


def test_boost_monotonicity():
    index = title_index({"match": "apple pie recipe", "other": "banana split dish"})

    def run(boost: float):
        plan = QueryPlan(
            should_clauses=(
                VariationGroup("entity", (Variation("apple"),), boost),
                VariationGroup("text", (Variation("banana split dish recipe"),), 1.0),
            )
        )
        return {r.doc_id: r.score for r in execute_query_plan(plan, index, k=10)}

    low = run(1.0)
    high = run(4.0)
    assert high["match"] - high["other"] > low["match"] - low["other"]


def test_best_variation_semantics_not_sum():
    # adding a redundant synonym of the same matched text must not inflate score
    index = title_index({"d1": "aspirin aspirin study"})
    single = QueryPlan(
        should_clauses=(VariationGroup("entity", (Variation("aspirin"),), 1.0),)
    )
    redundant = QueryPlan(
        should_clauses=(
            VariationGroup(
                "entity", (Variation("aspirin"), Variation("aspirin study")), 1.0
            ),
        )
    )
    s1 = execute_query_plan(single, index, k=1)[0].score
    s2 = execute_query_plan(redundant, index, k=1)[0].score
    # best variation may be the longer one, but never the sum of both
    assert s2 < s1 * 2


def test_variation_weight_scales_contribution():
    index = title_index({"d1": "coumadin dosing"})
    def score(weight):
        plan = QueryPlan(
            should_clauses=(
                VariationGroup("entity", (Variation("coumadin", weight, "synonym" if weight < 1 else "exact"),), 1.0),
            )
        )
        return execute_query_plan(plan, index, k=1)[0].score
    assert score(0.5) == pytest.approx(score(1.0) * 0.5, rel=1e-12)


def test_removing_document_removes_from_results():
    texts = {"d1": "shared tokens here", "d2": "shared tokens there"}
    plan = QueryPlan(should_clauses=(VariationGroup("text", (Variation("shared"),), 1.0),))
    full = execute_query_plan(plan, title_index(texts), k=10)
    assert {r.doc_id for r in full} == {"d1", "d2"}
    del texts["d2"]
    rebuilt = execute_query_plan(plan, title_index(texts), k=10)
    assert {r.doc_id for r in rebuilt} == {"d1"}


def test_ngram_subfield_contributes_score_not_matching(aspirin_corpus):
    index = build_index(aspirin_corpus)
    # "aspirint" shares trigrams with "aspirin" but no standard token
    plan = QueryPlan(
        should_clauses=(VariationGroup("text", (Variation("aspirint"),), 1.0),)
    )
    assert execute_query_plan(plan, index, k=10) == []


def test_retrieve_trace_event(aspirin_corpus):
    index = build_index(aspirin_corpus)
    trace = Trace()
    execute_query_plan(must_plan("aspirin"), index, k=5, trace=trace)
    assert trace.stages() == ["retrieve"]
    payload = trace.events[0].payload
    assert payload["results"][0]["doc_id"] == "d1"


# --- persistence ---


def test_index_round_trip(tmp_path, aspirin_corpus):
    index = build_index(aspirin_corpus)
    path = tmp_path / "corpus.idx"
    save_index(index, path)
    loaded = load_index(path, corpus=aspirin_corpus)
    assert loaded.doc_ids == index.doc_ids
    assert loaded.field_boosts == index.field_boosts
    assert set(loaded.indexes) == set(index.indexes)
    plan = must_plan("aspirin", "acetylsalicylic acid")
    before = execute_query_plan(plan, index, k=10)
    after = execute_query_plan(plan, loaded, k=10)
    assert [(r.doc_id, r.score) for r in before] == [(r.doc_id, r.score) for r in after]


def test_index_file_rejects_other_formats(tmp_path):
    path = tmp_path / "bogus.idx"
    path.write_text('{"format": "something-else"}\n', encoding="utf-8")
    with pytest.raises(DocfunnelError):
        load_index(path)


def test_build_requires_sealed_corpus():
    from docfunnel.corpus import Corpus

    with pytest.raises(DocfunnelError):
        build_index(Corpus())


def test_ngram_config_validation():
    with pytest.raises(DocfunnelError):
        AnalyzerConfig(kind="ngram", ngram_size=1)
