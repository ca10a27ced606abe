"""Bundled sample dataset: 200 docs, 20 queries, ontology, verb lexicon."""

from importlib import resources
from pathlib import Path


def sample_dir() -> Path:
    """Directory holding the bundled sample files."""
    return Path(resources.files(__package__) / "mldr_sample")


def sample_paths() -> dict[str, Path]:
    base = sample_dir()
    return {
        "corpus": base / "corpus.jsonl",
        "queries": base / "queries.tsv",
        "qrels": base / "qrels.tsv",
        "ontology": base / "ontology.jsonl",
        "verbs": base / "verbs.tsv",
    }
