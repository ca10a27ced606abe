"""Text analyzers: standard word tokenization and character n-gram subfields.

Every token count in the engine (chunk sizes, index statistics, context
budgets) comes from the standard analyzer so numbers agree across modules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DocfunnelError

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class AnalyzerConfig:
    """Configuration for one analyzer.

    kind "standard" segments on Unicode word boundaries and lowercases;
    kind "ngram" emits character n-grams of each lowercased word.
    """

    kind: str = "standard"
    ngram_size: int = 3
    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in ("standard", "ngram"):
            raise DocfunnelError(f"unknown analyzer kind: {self.kind!r}")
        if self.kind == "ngram" and self.ngram_size < 2:
            raise DocfunnelError("ngram_size must be >= 2")
        if not isinstance(self.stopwords, frozenset):
            object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def key(self) -> str:
        return "standard" if self.kind == "standard" else f"ngram{self.ngram_size}"

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "ngram_size": self.ngram_size,
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AnalyzerConfig":
        return cls(
            kind=rec["kind"],
            ngram_size=rec.get("ngram_size", 3),
            lowercase=rec.get("lowercase", True),
            stopwords=frozenset(rec.get("stopwords", ())),
        )


STANDARD = AnalyzerConfig()


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Lowercased word tokens with their (start, end) char spans in `text`.

    Spans refer to the original string; no stopword filtering is applied so
    spans stay usable for gazetteer matching and window chunking.
    """
    return [(m.group(0).lower(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def word_ngrams(word: str, n: int) -> list[str]:
    """Sliding character windows of size `n`; words shorter than `n` emit none."""
    return [word[i : i + n] for i in range(len(word) - n + 1)]


def analyze(text: str, config: AnalyzerConfig = STANDARD) -> list[str]:
    """Tokenize `text` under `config`; empty text yields an empty list."""
    if not text:
        return []
    words = [m.group(0) for m in _WORD_RE.finditer(text)]
    if config.lowercase:
        words = [w.lower() for w in words]
    if config.kind == "standard":
        if config.stopwords:
            words = [w for w in words if w not in config.stopwords]
        return words
    grams: list[str] = []
    for w in words:
        grams.extend(word_ngrams(w, config.ngram_size))
    return grams


def token_count(text: str) -> int:
    """Standard-analyzer token count, shared by chunking and statistics."""
    return len(analyze(text, STANDARD))
