"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class DocfunnelError(Exception):
    """Base class for all engine errors."""


class EmptyDocument(DocfunnelError):
    """Document has no usable text in any field."""


class DuplicateId(DocfunnelError):
    """Document id already present in the corpus."""


class ParseError(DocfunnelError):
    """A record could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EmptyPlan(DocfunnelError):
    """Query plan carries no clauses at all."""


class EmptyQuery(DocfunnelError):
    """Query text yields no analyzable tokens."""


class UnknownConcept(DocfunnelError):
    """Concept id not present in the ontology."""


class DimensionMismatch(DocfunnelError):
    """Vectors of different dimensions were combined."""


class EmbeddingTimeout(DocfunnelError):
    """Remote embedding request exceeded its deadline."""


class BadResponse(DocfunnelError):
    """Remote provider returned a malformed or mismatched response."""


class EmbeddingFailure(DocfunnelError):
    """Embedding provider failed while building a chunk index."""


class ScorerFailure(DocfunnelError):
    """External pair-scorer violated its contract."""


class NoPositives(DocfunnelError):
    """Query has no relevant document in the qrels."""
