import json

import pytest

from docfunnel.analysis import STANDARD
from docfunnel.corpus import Corpus, Document, Section, ingest_document
from docfunnel.expansion import Ontology, load_ontology, load_verb_lexicon
from docfunnel.sparse import build_index

ONTOLOGY_RECORDS = [
    {"id": "c_aspirin", "label": "aspirin",
     "synonyms": ["acetylsalicylic acid"], "hypernyms": ["c_nsaid"], "hyponyms": []},
    {"id": "c_nsaid", "label": "NSAID", "synonyms": [],
     "hypernyms": [], "hyponyms": ["c_aspirin"]},
    {"id": "c_heart_attack", "label": "heart attack",
     "synonyms": ["myocardial infarction"], "hypernyms": [], "hyponyms": []},
    {"id": "c_panic", "label": "panic episode", "synonyms": ["attack"],
     "hypernyms": [], "hyponyms": []},
    {"id": "c_headache", "label": "headache", "synonyms": ["cephalalgia"],
     "hypernyms": [], "hyponyms": []},
]

VERB_LEXICON_LINES = [
    "prevent\tavert, stop",
    "treat\tremedy",
]


@pytest.fixture
def ontology_file(tmp_path):
    path = tmp_path / "ontology.jsonl"
    path.write_text(
        "\n".join(json.dumps(r) for r in ONTOLOGY_RECORDS) + "\n", encoding="utf-8"
    )
    return path


@pytest.fixture
def ontology(ontology_file) -> Ontology:
    loaded, warnings = load_ontology(ontology_file)
    assert warnings == []
    return loaded


@pytest.fixture
def lexicon(tmp_path):
    path = tmp_path / "verbs.tsv"
    path.write_text("\n".join(VERB_LEXICON_LINES) + "\n", encoding="utf-8")
    return load_verb_lexicon(path)


def make_doc(doc_id: str, title: str = "", abstract: str = "", sections=()) -> Document:
    return Document(
        id=doc_id,
        title=title,
        abstract=abstract,
        sections=tuple(Section(heading=h, text=t) for h, t in sections),
    )


def title_corpus(texts: dict[str, str]) -> Corpus:
    """Corpus whose entire content sits in the title field, for hand math."""
    corpus = Corpus()
    for doc_id, text in texts.items():
        corpus.add(make_doc(doc_id, title=text))
    return corpus.seal()


def title_index(texts: dict[str, str]):
    """Single standard field over titles with neutral boost."""
    corpus = title_corpus(texts)
    return build_index(
        corpus, field_configs={"title": [STANDARD]}, field_boosts={"title": 1.0}
    )


@pytest.fixture
def aspirin_corpus() -> Corpus:
    """Small fixture corpus where d1 alone speaks about aspirin."""
    corpus = Corpus()
    corpus.add(
        make_doc(
            "d1",
            title="Aspirin study",
            abstract="Acetylsalicylic acid lowers clot risk.",
            sections=[
                ("Intro", "Patients taking aspirin were monitored."),
                ("Results", "Fewer cardiovascular events were observed."),
            ],
        )
    )
    corpus.add(
        make_doc(
            "d2",
            title="Sleep patterns",
            abstract="A study of insomnia in adults.",
            sections=[("Body", "Participants reported sleep duration nightly.")],
        )
    )
    corpus.add(
        make_doc(
            "d3",
            title="Citrate chemistry",
            abstract="Industrial uses of citrate compounds.",
            sections=[("Body", "Concentrations were measured daily.")],
        )
    )
    return corpus.seal()


@pytest.fixture
def sample_dataset():
    from docfunnel.data import sample_paths

    return sample_paths()


@pytest.fixture
def ingest():
    return ingest_document
