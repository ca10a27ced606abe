import json

import pytest
from fastapi.testclient import TestClient

from docfunnel.corpus import load_corpus_file
from docfunnel.expansion import load_ontology, load_verb_lexicon
from docfunnel.service import Engine, ServiceConfig, create_app


@pytest.fixture(scope="module")
def engine():
    from docfunnel.data import sample_paths

    paths = sample_paths()
    report = load_corpus_file(paths["corpus"])
    ontology, _ = load_ontology(paths["ontology"])
    lexicon = load_verb_lexicon(paths["verbs"])
    return Engine(report.corpus, ontology=ontology, lexicon=lexicon)


@pytest.fixture(scope="module")
def client(engine):
    return TestClient(create_app(engine), raise_server_exceptions=False)


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_search_returns_results_and_trace(client):
    response = client.post(
        "/search",
        json={"query": "does aspirin prevent heart attack", "strategy": "should-expansion", "k": 10},
    )
    assert response.status_code == 200
    body = response.json()
    assert len(body["results"]) <= 10
    assert body["results"][0]["doc_id"] == "d001"
    assert body["results"][0]["title"]
    assert body["results"][0]["snippet"]

    trace = client.get(f"/trace/{body['trace_id']}").json()
    stages = [e["stage"] for e in trace["events"]]
    assert stages == ["entities", "expansion", "plan", "retrieve"]
    assert [e["ordinal"] for e in trace["events"]] == [1, 2, 3, 4]


def test_search_empty_query_400(client):
    response = client.post("/search", json={"query": "", "k": 5})
    assert response.status_code == 400
    body = response.json()
    assert body["code"] == "bad_request"
    assert "message" in body


def test_search_unmatchable_must_entity_empty_but_traced(client):
    response = client.post(
        "/search",
        json={"query": "zotarolimus effects", "strategy": "must-expansion", "k": 10},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["results"] == []
    trace = client.get(f"/trace/{body['trace_id']}").json()
    stages = [e["stage"] for e in trace["events"]]
    assert stages == ["entities", "expansion", "plan", "retrieve"]
    retrieve = trace["events"][-1]["payload"]
    assert retrieve["results"] == []


def test_expansion_preview_and_override_round_trip(client):
    preview = client.post(
        "/expansion/preview", json={"query": "does aspirin prevent heart attack"}
    )
    assert preview.status_code == 200
    tree = preview.json()["tree"]
    assert len(preview.json()["mentions"]) == 2

    # drop one variation, as the panel's toggle would
    edited = json.loads(json.dumps(tree))
    removed = edited["should"][0]["variations"].pop()
    response = client.post("/search", json={"plan": edited, "k": 5})
    assert response.status_code == 200
    trace = client.get(f"/trace/{response.json()['trace_id']}").json()
    plan_events = [e for e in trace["events"] if e["stage"] == "plan"]
    assert len(plan_events) == 1
    echoed = plan_events[0]["payload"]["tree"]
    assert echoed == edited
    assert removed not in echoed["should"][0]["variations"]


def test_preview_no_entities_residual_only(client):
    preview = client.post("/expansion/preview", json={"query": "unmatched words only"})
    assert preview.status_code == 200
    body = preview.json()
    assert body["mentions"] == []
    origins = [g["origin"] for g in body["tree"]["should"]]
    assert origins == ["text"]


def test_ask_extractive(client):
    response = client.post(
        "/ask",
        json={"doc_id": "d001", "question": "does acetylsalicylic acid avert infarction",
              "output": "extractive"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["passages"]
    first = body["passages"][0]
    assert set(first) == {"chunk_id", "start", "end", "text", "score"}
    assert body["answer"].startswith("Based on [")

    trace = client.get(f"/trace/{body['trace_id']}").json()
    stages = [e["stage"] for e in trace["events"]]
    assert stages[0] == "chunking"
    assert "extract" in stages and "pack" in stages


def test_ask_chain_three_hops(client):
    response = client.post(
        "/ask",
        json={"doc_id": "d001", "question": "acetylsalicylic acid", "output": "chain"},
    )
    assert response.status_code == 200
    chain = response.json()["chain"]
    assert 1 <= len(chain) <= 3
    assert chain[0]["hop"] == 1


def test_ask_packed(client):
    response = client.post(
        "/ask",
        json={"doc_id": "d001", "question": "acetylsalicylic acid", "output": "packed"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["context"]
    assert len(body["context_texts"]) == len(body["context"])


def test_ask_without_doc_400(client):
    response = client.post("/ask", json={"question": "anything", "output": "extractive"})
    assert response.status_code == 400


def test_ask_unknown_doc_404(client):
    response = client.post(
        "/ask", json={"doc_id": "missing", "question": "x", "output": "extractive"}
    )
    assert response.status_code == 404
    assert response.json()["code"] == "not_found"


def test_ask_bad_output_400(client):
    response = client.post(
        "/ask", json={"doc_id": "d001", "question": "x", "output": "interpretive-dance"}
    )
    assert response.status_code == 400


def test_trace_unknown_404(client):
    response = client.get("/trace/deadbeef")
    assert response.status_code == 404


def test_document_view(client):
    response = client.get("/documents/d001")
    assert response.status_code == 200
    body = response.json()
    assert body["id"] == "d001"
    assert body["chunks"]
    assert {c["source_field"] for c in body["chunks"]} <= {"title", "abstract", "section"}


def test_document_view_missing_404(client):
    assert client.get("/documents/none").status_code == 404


def test_sessions_isolated(client):
    r1 = client.post("/ask", json={"doc_id": "d001", "question": "a", "output": "chain",
                                   "session_id": "alpha"})
    r2 = client.post("/ask", json={"doc_id": "d002", "question": "b", "output": "chain",
                                   "session_id": "beta"})
    assert r1.json()["session_id"] == "alpha"
    assert r2.json()["session_id"] == "beta"


def test_traces_immutable_once_written(client, engine):
    response = client.post("/search", json={"query": "does warfarin treat stroke", "k": 3})
    trace_id = response.json()["trace_id"]
    first = client.get(f"/trace/{trace_id}").json()
    # a new request must not mutate the stored trace
    client.post("/search", json={"query": "does insulin improve influenza", "k": 3})
    second = client.get(f"/trace/{trace_id}").json()
    assert first == second


def test_chunk_index_cache_reused(engine):
    a = engine.chunk_index_for("d001")
    b = engine.chunk_index_for("d001")
    assert a is b


def test_service_config_env_overrides(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps({"corpus": "corpus.jsonl", "port": 9999, "strategy": "most-fields",
                    "scorer": {"kind": "lexical"}}),
        encoding="utf-8",
    )
    config = ServiceConfig.load(
        config_path,
        env={"DOCFUNNEL_PORT": "7777", "DOCFUNNEL_EMBEDDER_DIMENSION": "64"},
    )
    assert config.port == 7777
    assert config.strategy == "most-fields"
    assert config.embedder.dimension == 64
    assert config.scorer_kind == "lexical"


def test_service_config_rejects_unknown_scorer(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"scorer": {"kind": "psychic"}}), encoding="utf-8")
    from docfunnel.errors import DocfunnelError

    with pytest.raises(DocfunnelError):
        ServiceConfig.load(config_path, env={})


def test_cli_and_service_share_ranking(engine):
    """The engine path is the single source of rankings for both surfaces."""
    results, _, _ = engine.search(query="does aspirin prevent heart attack", k=5)
    app_client = TestClient(create_app(engine))
    response = app_client.post(
        "/search", json={"query": "does aspirin prevent heart attack", "k": 5}
    )
    api_results = response.json()["results"]
    assert [(r.doc_id, r.score) for r in results] == [
        (r["doc_id"], r["score"]) for r in api_results
    ]
