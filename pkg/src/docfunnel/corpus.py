"""Fielded documents, content-aware chunking, and corpus bookkeeping.

Documents arrive as line-delimited JSON records with title/abstract/sections
fields. Chunking is section-first: each field that fits the token budget
becomes one chunk, oversized sections fall back to overlapping token windows
whose overlap-stripped concatenation reproduces the section text exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import token_count, tokenize_with_spans
from .errors import DocfunnelError, DuplicateId, EmptyDocument, ParseError


@dataclass(frozen=True)
class Section:
    heading: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise DocfunnelError("section text must be non-empty")


@dataclass(frozen=True)
class Document:
    id: str
    title: str = ""
    abstract: str = ""
    sections: tuple[Section, ...] = ()
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise DocfunnelError("document id must be non-empty")
        if not (self.title.strip() or self.abstract.strip() or self.sections):
            raise EmptyDocument(f"document {self.id!r} has no content")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "abstract": self.abstract,
            "sections": [{"heading": s.heading, "text": s.text} for s in self.sections],
            "metadata": dict(self.metadata),
        }


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_id: int
    source_field: str  # title | abstract | section
    section_index: int | None
    text: str
    token_count: int
    # char span of this chunk within its source field text; windows of one
    # section tile the section when their overlap prefixes are stripped
    char_span: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class ChunkPolicy:
    max_tokens: int = 512
    overlap_tokens: int = 64

    def __post_init__(self):
        if self.max_tokens < 1:
            raise DocfunnelError("max_tokens must be >= 1")
        if not 0 <= self.overlap_tokens < self.max_tokens:
            raise DocfunnelError("overlap_tokens must be in [0, max_tokens)")

    def key(self) -> str:
        return f"{self.max_tokens}:{self.overlap_tokens}"


def ingest_document(raw: dict) -> Document:
    """Validate one corpus record into a Document."""
    if not isinstance(raw, dict) or not raw.get("id"):
        raise DocfunnelError("record carries no id")
    sections = []
    for sec in raw.get("sections") or []:
        text = sec.get("text", "")
        if text.strip():
            sections.append(Section(heading=sec.get("heading", ""), text=text))
    metadata = {str(k): str(v) for k, v in (raw.get("metadata") or {}).items()}
    return Document(
        id=str(raw["id"]),
        title=raw.get("title", "") or "",
        abstract=raw.get("abstract", "") or "",
        sections=tuple(sections),
        metadata=metadata,
    )


def _window_chunks(
    doc_id: str, start_id: int, section_index: int, text: str, policy: ChunkPolicy
) -> list[Chunk]:
    """Split one oversized section into overlapping token windows.

    Window i spans tokens [i*stride, i*stride + max). Char boundaries sit at
    token starts so stripping the first `overlap` tokens of window i resumes
    exactly where window i-1 ended; the first window keeps any leading text
    and the last keeps any trailing text.
    """
    spans = tokenize_with_spans(text)
    total = len(spans)
    stride = policy.max_tokens - policy.overlap_tokens
    chunks: list[Chunk] = []
    start_tok = 0
    while True:
        end_tok = min(start_tok + policy.max_tokens, total)
        char_start = 0 if start_tok == 0 else spans[start_tok][1]
        char_end = len(text) if end_tok == total else spans[end_tok][1]
        piece = text[char_start:char_end]
        chunks.append(
            Chunk(
                doc_id=doc_id,
                chunk_id=start_id + len(chunks),
                source_field="section",
                section_index=section_index,
                text=piece,
                token_count=end_tok - start_tok,
                char_span=(char_start, char_end),
            )
        )
        if end_tok >= total:
            break
        start_tok += stride
    return chunks


def chunk_document(doc: Document, policy: ChunkPolicy = ChunkPolicy()) -> list[Chunk]:
    """Chunk a document: one chunk per fitting field, windows for the rest."""
    chunks: list[Chunk] = []

    def add_whole(source_field: str, section_index: int | None, text: str):
        chunks.append(
            Chunk(
                doc_id=doc.id,
                chunk_id=len(chunks),
                source_field=source_field,
                section_index=section_index,
                text=text,
                token_count=token_count(text),
                char_span=(0, len(text)),
            )
        )

    if doc.title.strip():
        add_whole("title", None, doc.title)
    if doc.abstract.strip():
        add_whole("abstract", None, doc.abstract)
    for i, sec in enumerate(doc.sections):
        n = token_count(sec.text)
        if n <= policy.max_tokens:
            add_whole("section", i, sec.text)
        else:
            chunks.extend(_window_chunks(doc.id, len(chunks), i, sec.text, policy))
    return chunks


@dataclass
class FieldStats:
    total_tokens: int = 0
    doc_count: int = 0  # documents with a non-empty value for this field
    doc_freq: dict[str, int] = field(default_factory=dict)

    @property
    def avg_length(self) -> float:
        return self.total_tokens / self.doc_count if self.doc_count else 0.0


@dataclass
class CorpusStats:
    doc_count: int
    fields: dict[str, FieldStats]


class Corpus:
    """Single-writer document store; seal before indexing, then read freely."""

    def __init__(self):
        self._docs: dict[str, Document] = {}
        self._order: list[str] = []
        self._sealed = False

    def __len__(self) -> int:
        return len(self._order)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    @property
    def sealed(self) -> bool:
        return self._sealed

    def add(self, doc: Document) -> None:
        if self._sealed:
            raise DocfunnelError("corpus is sealed")
        if doc.id in self._docs:
            raise DuplicateId(f"document {doc.id!r} already in corpus")
        self._docs[doc.id] = doc
        self._order.append(doc.id)

    def seal(self) -> "Corpus":
        self._sealed = True
        return self

    def get(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def doc_ids(self) -> list[str]:
        return list(self._order)

    def documents(self) -> list[Document]:
        return [self._docs[i] for i in self._order]

    def field_text(self, doc_id: str, fieldname: str) -> str:
        doc = self._docs[doc_id]
        if fieldname == "title":
            return doc.title
        if fieldname == "abstract":
            return doc.abstract
        if fieldname == "sections":
            return "\n".join(s.text for s in doc.sections)
        raise KeyError(fieldname)

    def stats(self) -> CorpusStats:
        from .analysis import STANDARD, analyze

        fields: dict[str, FieldStats] = {}
        for name in ("title", "abstract", "sections"):
            fs = FieldStats()
            for doc_id in self._order:
                tokens = analyze(self.field_text(doc_id, name), STANDARD)
                if not tokens:
                    continue
                fs.doc_count += 1
                fs.total_tokens += len(tokens)
                for t in set(tokens):
                    fs.doc_freq[t] = fs.doc_freq.get(t, 0) + 1
            fields[name] = fs
        return CorpusStats(doc_count=len(self._order), fields=fields)


@dataclass
class LoadReport:
    corpus: Corpus
    stats: CorpusStats
    errors: list[ParseError] = field(default_factory=list)


def load_corpus_file(path: str | Path) -> LoadReport:
    """Load a line-delimited corpus file, collecting per-line parse errors."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    corpus = Corpus()
    errors: list[ParseError] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                corpus.add(ingest_document(json.loads(line)))
            except (json.JSONDecodeError, DocfunnelError) as exc:
                errors.append(ParseError(str(exc), line=lineno))
    corpus.seal()
    return LoadReport(corpus=corpus, stats=corpus.stats(), errors=errors)
