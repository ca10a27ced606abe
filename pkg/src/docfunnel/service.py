"""HTTP service exposing the funnel: search, expansion preview, ask, traces.

The Engine owns all shared state (corpus, indexes, ontology, caches, trace
ring) and is the single execution path for both the HTTP endpoints and the
CLI, so identical inputs rank identically everywhere. Traces live in a
bounded in-memory ring and are immutable once written.
"""

# note: no `from __future__ import annotations` here; FastAPI needs live
# annotations to resolve the request models defined inside create_app
import json
import os
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any

from .corpus import ChunkPolicy, Corpus, load_corpus_file
from .docqa import (
    AnswerBundle,
    ChunkIndex,
    QAConfig,
    answer_question,
    build_chunk_index,
    render_answer_template,
)
from .embed import Embedder, EmbedderConfig
from .errors import (
    BadResponse,
    DocfunnelError,
    EmbeddingFailure,
    EmbeddingTimeout,
    EmptyPlan,
    EmptyQuery,
    ParseError,
    ScorerFailure,
)
from .expansion import Ontology, build_query_plan, extract_entities, load_ontology, load_verb_lexicon
from .plan import QueryPlan
from .sparse import IndexSet, ScoredDoc, build_index, execute_query_plan
from .trace import Trace

DEFAULT_STRATEGY = "should-expansion"
TRACE_RING_SIZE = 1000
CHUNK_CACHE_SIZE = 32
SNIPPET_CHARS = 200

ERROR_STATUS = {
    "bad_request": 400,
    "not_found": 404,
    "conflict": 409,
    "upstream_failure": 502,
    "internal": 500,
}


class ApiException(DocfunnelError):
    def __init__(self, code: str, message: str, detail: Any = None):
        super().__init__(message)
        assert code in ERROR_STATUS
        self.code = code
        self.message = message
        self.detail = detail

    @property
    def status(self) -> int:
        return ERROR_STATUS[self.code]

    def body(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


SCORER_KINDS = ("lexical",)  # the built-in pair-scorer; external scorers plug in via Engine


@dataclass
class ServiceConfig:
    corpus_path: str = ""
    ontology_path: str = ""
    lexicon_path: str = ""
    port: int = 8080
    strategy: str = DEFAULT_STRATEGY
    embedder: EmbedderConfig = dc_field(default_factory=EmbedderConfig)
    qa: QAConfig = dc_field(default_factory=QAConfig)
    scorer_kind: str = "lexical"
    trace_ring_size: int = TRACE_RING_SIZE
    trace_spill_path: str = ""

    def __post_init__(self):
        if self.scorer_kind not in SCORER_KINDS:
            raise DocfunnelError(f"unknown scorer kind: {self.scorer_kind!r}")

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "ServiceConfig":
        """Config file values overridden by DOCFUNNEL_* environment variables."""
        env = os.environ if env is None else env
        raw: dict = {}
        if path:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        embedder_raw = dict(raw.get("embedder", {}))
        qa_raw = dict(raw.get("qa", {}))

        def pick(key: str, default):
            return env.get(f"DOCFUNNEL_{key.upper()}", raw.get(key, default))

        if "DOCFUNNEL_EMBEDDER_KIND" in env:
            embedder_raw["kind"] = env["DOCFUNNEL_EMBEDDER_KIND"]
        if "DOCFUNNEL_EMBEDDER_ENDPOINT" in env:
            embedder_raw["endpoint"] = env["DOCFUNNEL_EMBEDDER_ENDPOINT"]
        if "DOCFUNNEL_EMBEDDER_DIMENSION" in env:
            embedder_raw["dimension"] = int(env["DOCFUNNEL_EMBEDDER_DIMENSION"])
        scorer_raw = raw.get("scorer", {})
        return cls(
            corpus_path=str(pick("corpus", "")),
            ontology_path=str(pick("ontology", "")),
            lexicon_path=str(pick("lexicon", "")),
            port=int(pick("port", 8080)),
            strategy=str(pick("strategy", DEFAULT_STRATEGY)),
            embedder=EmbedderConfig(**embedder_raw),
            qa=QAConfig(**qa_raw),
            scorer_kind=str(env.get("DOCFUNNEL_SCORER_KIND", scorer_raw.get("kind", "lexical"))),
            trace_ring_size=int(pick("trace_ring_size", TRACE_RING_SIZE)),
            trace_spill_path=str(pick("trace_spill_path", "")),
        )


@dataclass
class SessionState:
    session_id: str
    doc_id: str | None = None
    last_query: str | None = None
    last_tree: dict | None = None


class TraceStore:
    """Bounded ring of immutable traces with optional file spill."""

    def __init__(self, size: int = TRACE_RING_SIZE, spill_path: str = ""):
        self._ring: OrderedDict[str, Trace] = OrderedDict()
        self._size = size
        self._spill_path = spill_path
        self._lock = threading.Lock()

    def put(self, trace: Trace) -> str:
        trace_id = uuid.uuid4().hex
        with self._lock:
            self._ring[trace_id] = trace
            while len(self._ring) > self._size:
                old_id, old = self._ring.popitem(last=False)
                if self._spill_path:
                    with open(self._spill_path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps({"trace_id": old_id,
                                             "events": old.to_records()}) + "\n")
        return trace_id

    def get(self, trace_id: str) -> Trace | None:
        with self._lock:
            return self._ring.get(trace_id)


class Engine:
    """Shared execution core behind the HTTP endpoints and the CLI."""

    def __init__(
        self,
        corpus: Corpus,
        index_set: IndexSet | None = None,
        ontology: Ontology | None = None,
        lexicon: dict[str, list[str]] | None = None,
        embedder: Embedder | None = None,
        qa_config: QAConfig = QAConfig(),
        strategy: str = DEFAULT_STRATEGY,
        chunk_policy: ChunkPolicy = ChunkPolicy(),
        trace_ring_size: int = TRACE_RING_SIZE,
        trace_spill_path: str = "",
    ):
        self.corpus = corpus
        self.index_set = index_set if index_set is not None else build_index(corpus)
        self.ontology = ontology
        self.lexicon = lexicon or {}
        self.embedder = embedder or Embedder()
        self.qa_config = qa_config
        self.strategy = strategy
        self.chunk_policy = chunk_policy
        self.traces = TraceStore(trace_ring_size, trace_spill_path)
        self._chunk_cache: OrderedDict[str, ChunkIndex] = OrderedDict()
        self._cache_lock = threading.Lock()
        self._build_locks: dict[str, threading.Lock] = {}
        self._sessions: dict[str, SessionState] = {}
        self._session_lock = threading.Lock()

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "Engine":
        if not config.corpus_path:
            raise DocfunnelError("no corpus configured")
        report = load_corpus_file(config.corpus_path)
        ontology = None
        if config.ontology_path:
            ontology, _ = load_ontology(config.ontology_path)
        lexicon = load_verb_lexicon(config.lexicon_path) if config.lexicon_path else {}
        return cls(
            corpus=report.corpus,
            ontology=ontology,
            lexicon=lexicon,
            embedder=Embedder(config.embedder),
            qa_config=config.qa,
            strategy=config.strategy,
            trace_ring_size=config.trace_ring_size,
            trace_spill_path=config.trace_spill_path,
        )

    # --- sessions ---

    def session(self, session_id: str | None) -> SessionState:
        with self._session_lock:
            if session_id and session_id in self._sessions:
                return self._sessions[session_id]
            state = SessionState(session_id=session_id or uuid.uuid4().hex)
            self._sessions[state.session_id] = state
            return state

    # --- funnel operations ---

    def build_plan(self, query: str, strategy: str | None = None,
                   trace: Trace | None = None) -> QueryPlan:
        return build_query_plan(
            query,
            strategy or self.strategy,
            ontology=self.ontology,
            lexicon=self.lexicon,
            trace=trace,
        )

    def search(
        self,
        query: str | None = None,
        strategy: str | None = None,
        k: int = 10,
        plan_override: dict | None = None,
        session_id: str | None = None,
    ) -> tuple[list[ScoredDoc], str, SessionState]:
        trace = Trace()
        if plan_override is not None:
            plan = QueryPlan.from_record(plan_override)
            # echo the submitted tree untouched so clients can verify it ran
            trace.add("plan", {"strategy": "override", "tree": plan_override})
        else:
            if not query or not query.strip():
                raise EmptyQuery("query must be non-empty")
            plan = self.build_plan(query, strategy, trace=trace)
        results = execute_query_plan(plan, self.index_set, k=k, trace=trace)
        trace_id = self.traces.put(trace)
        state = self.session(session_id)
        state.last_query = query
        state.last_tree = plan.to_record()
        return results, trace_id, state

    def expansion_preview(self, query: str) -> dict:
        if not query or not query.strip():
            raise EmptyQuery("query must be non-empty")
        if self.ontology is None:
            raise DocfunnelError("no ontology configured")
        mentions = extract_entities(query, self.ontology)
        plan = self.build_plan(query, "should-expansion")
        return {
            "query": query,
            "mentions": [
                {"surface": m.surface, "start": m.start, "end": m.end,
                 "concept_id": m.concept_id}
                for m in mentions
            ],
            "tree": plan.to_record(),
        }

    def chunk_index_for(self, doc_id: str) -> ChunkIndex:
        key = f"{doc_id}|{self.embedder.config.key()}|{self.chunk_policy.key()}"
        with self._cache_lock:
            if key in self._chunk_cache:
                self._chunk_cache.move_to_end(key)
                return self._chunk_cache[key]
            build_lock = self._build_locks.setdefault(key, threading.Lock())
        with build_lock:
            with self._cache_lock:
                if key in self._chunk_cache:
                    return self._chunk_cache[key]
            index = build_chunk_index(
                self.corpus.get(doc_id), self.embedder, self.chunk_policy
            )
            with self._cache_lock:
                self._chunk_cache[key] = index
                while len(self._chunk_cache) > CHUNK_CACHE_SIZE:
                    self._chunk_cache.popitem(last=False)
            return index

    def ask(
        self,
        doc_id: str,
        question: str,
        session_id: str | None = None,
    ) -> tuple[AnswerBundle, str, SessionState]:
        if doc_id not in self.corpus:
            raise ApiException("not_found", f"document {doc_id!r} not found")
        index = self.chunk_index_for(doc_id)
        bundle = answer_question(index, question, self.qa_config)
        trace_id = self.traces.put(bundle.trace)
        state = self.session(session_id)
        state.doc_id = doc_id
        return bundle, trace_id, state

    def document_view(self, doc_id: str) -> dict:
        if doc_id not in self.corpus:
            raise ApiException("not_found", f"document {doc_id!r} not found")
        doc = self.corpus.get(doc_id)
        chunks = self.chunk_index_for(doc_id).chunks
        record = doc.to_record()
        record["chunks"] = [
            {
                "chunk_id": c.chunk_id,
                "source_field": c.source_field,
                "section_index": c.section_index,
                "text": c.text,
                "token_count": c.token_count,
            }
            for c in chunks
        ]
        return record


def _to_api_error(exc: Exception) -> ApiException:
    if isinstance(exc, ApiException):
        return exc
    if isinstance(exc, (EmptyQuery, EmptyPlan, ParseError)):
        return ApiException("bad_request", str(exc))
    if isinstance(exc, (EmbeddingFailure, EmbeddingTimeout, BadResponse, ScorerFailure)):
        return ApiException("upstream_failure", str(exc))
    if isinstance(exc, KeyError):
        return ApiException("not_found", str(exc))
    if isinstance(exc, DocfunnelError):
        return ApiException("bad_request", str(exc))
    return ApiException("internal", str(exc))


def create_app(engine: Engine):
    """FastAPI app over an engine; import stays local so the core has no
    hard web dependency at import time."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse
    from pydantic import BaseModel

    class SearchRequest(BaseModel):
        query: str | None = None
        strategy: str | None = None
        k: int = 10
        plan: dict | None = None
        session_id: str | None = None

    class PreviewRequest(BaseModel):
        query: str

    class AskRequest(BaseModel):
        doc_id: str | None = None
        question: str
        output: str = "extractive"
        session_id: str | None = None

    app = FastAPI(title="docfunnel", version="0.1.0")

    @app.exception_handler(Exception)
    async def handle_error(request: Request, exc: Exception):
        err = _to_api_error(exc)
        return JSONResponse(status_code=err.status, content=err.body())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "documents": len(engine.corpus)}

    @app.post("/search")
    def search(req: SearchRequest):
        try:
            results, trace_id, state = engine.search(
                query=req.query, strategy=req.strategy, k=req.k,
                plan_override=req.plan, session_id=req.session_id,
            )
        except Exception as exc:
            err = _to_api_error(exc)
            return JSONResponse(status_code=err.status, content=err.body())
        body = {
            "results": [
                {
                    "rank": r.rank,
                    "doc_id": r.doc_id,
                    "score": r.score,
                    "title": engine.corpus.get(r.doc_id).title,
                    "snippet": _snippet(engine.corpus, r.doc_id),
                }
                for r in results
            ],
            "trace_id": trace_id,
            "session_id": state.session_id,
        }
        return body

    @app.post("/expansion/preview")
    def preview(req: PreviewRequest):
        try:
            return engine.expansion_preview(req.query)
        except Exception as exc:
            err = _to_api_error(exc)
            return JSONResponse(status_code=err.status, content=err.body())

    @app.post("/ask")
    def ask(req: AskRequest):
        if not req.doc_id:
            return JSONResponse(
                status_code=400,
                content=ApiException("bad_request", "ask requires a selected doc_id").body(),
            )
        if req.output not in ("extractive", "chain", "packed"):
            return JSONResponse(
                status_code=400,
                content=ApiException("bad_request", f"unknown output {req.output!r}").body(),
            )
        try:
            bundle, trace_id, state = engine.ask(
                req.doc_id, req.question, session_id=req.session_id
            )
        except Exception as exc:
            err = _to_api_error(exc)
            return JSONResponse(status_code=err.status, content=err.body())
        record = bundle.to_record()
        body = {
            "question": record["question"],
            "doc_id": req.doc_id,
            "output": req.output,
            "trace_id": trace_id,
            "session_id": state.session_id,
            "answer": render_answer_template(bundle),
        }
        if req.output == "extractive":
            body["passages"] = record["passages"]
        elif req.output == "chain":
            body["chain"] = record["chain"]
        else:
            body["context"] = record["context"]
            body["context_texts"] = list(bundle.context.texts)
        return body

    @app.get("/trace/{trace_id}")
    def get_trace(trace_id: str):
        trace = engine.traces.get(trace_id)
        if trace is None:
            return JSONResponse(
                status_code=404,
                content=ApiException("not_found", f"trace {trace_id!r} not found").body(),
            )
        return {
            "trace_id": trace_id,
            "events": [
                {"ordinal": e.ordinal, "stage": e.stage, "payload": e.payload,
                 "timestamp": e.timestamp}
                for e in trace.events
            ],
        }

    @app.get("/documents/{doc_id}")
    def get_document(doc_id: str):
        try:
            return engine.document_view(doc_id)
        except Exception as exc:
            err = _to_api_error(exc)
            return JSONResponse(status_code=err.status, content=err.body())

    return app


def _snippet(corpus: Corpus, doc_id: str) -> str:
    doc = corpus.get(doc_id)
    source = doc.abstract or (doc.sections[0].text if doc.sections else doc.title)
    return source[:SNIPPET_CHARS]


def serve(config: ServiceConfig) -> None:
    import uvicorn

    engine = Engine.from_config(config)
    uvicorn.run(create_app(engine), host="0.0.0.0", port=config.port)
