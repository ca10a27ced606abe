"""Deterministic generator for the bundled synonym-swapped sample dataset.

The construction isolates the vocabulary-gap effect: each query names its
concepts by ontology label, while the relevant document is phrased only in
the concepts' synonyms. Distractors share the query's function words and
verbs but never a query concept, so plain most-fields matching cannot reach
the positives while expansion can. Two queries use concepts absent from
every document, so strict entity filtering returns nothing for them.

Run `python -m docfunnel.data.generate` to regenerate the files in place.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

# (drug label, drug synonym), (condition label, condition synonym) per query.
# Label tokens and synonym tokens are disjoint everywhere; the generator
# asserts this before writing anything.
DRUGS = [
    ("aspirin", "acetylsalicylic acid"),
    ("warfarin", "coumadin"),
    ("metformin", "glucophage"),
    ("ibuprofen", "brufen"),
    ("penicillin", "benzylpenicillin"),
    ("insulin", "humulin"),
    ("morphine", "duramorph"),
    ("caffeine", "trimethylxanthine"),
    ("atorvastatin", "lipitor"),
    ("omeprazole", "prilosec"),
    ("amoxicillin", "amoxil"),
    ("lisinopril", "zestril"),
    ("prednisone", "deltasone"),
    ("albuterol", "salbutamol"),
    ("gabapentin", "neurontin"),
    ("sertraline", "zoloft"),
    ("levothyroxine", "synthroid"),
    ("clopidogrel", "plavix"),
]

CONDITIONS = [
    ("heart attack", "myocardial infarction"),
    ("stroke", "cerebrovascular accident"),
    ("diabetes", "hyperglycemia"),
    ("hypertension", "elevated arterial tension"),
    ("migraine", "hemicrania"),
    ("influenza", "grippe"),
    ("asthma", "bronchospasm"),
    ("insomnia", "sleeplessness"),
    ("arthritis", "synovitis"),
    ("anemia", "erythropenia"),
    ("depression", "melancholia"),
    ("epilepsy", "seizure disorder"),
    ("osteoporosis", "bone fragility syndrome"),
    ("pneumonia", "pulmonary infection"),
    ("eczema", "atopic dermatitis"),
    ("glaucoma", "ocular hypertensive neuropathy"),
    ("ulcer", "peptic erosion"),
    ("thrombosis", "clot formation"),
]

# Queries 19 and 20 use concepts that occur in no document at all.
MISSING = [
    (("zotarolimus", "zotamycin"), ("vasculitis", "vessel soreness")),
    (("fexapotide", "fexarine"), ("neuralgia", "nerve ache")),
]

VERBS = {
    "prevent": ["avert", "forestall"],
    "treat": ["remedy", "palliate"],
    "reduce": ["lessen", "attenuate"],
    "cause": ["induce", "provoke"],
    "improve": ["ameliorate", "bolster"],
}

# Hypernym nodes: linked from drugs/conditions, never mentioned in documents.
HYPERNYMS = {
    "medication compound": ["aspirin", "warfarin", "metformin", "ibuprofen"],
    "chronic ailment": ["diabetes", "hypertension", "asthma", "arthritis"],
}

# Decoy concepts appear only in distractor documents.
DECOYS = [
    ("ketamine", "ketalar"),
    ("fentanyl", "sublimaze"),
    ("propofol", "diprivan"),
    ("vertigo", "dizzy spells"),
    ("tinnitus", "ear ringing"),
    ("gout", "urate arthropathy"),
]

FILLER = (
    "patients study cohort trial randomized placebo outcomes baseline followup "
    "analysis participants clinical dose daily weeks observed significant "
    "measured enrolled groups protocol screening visits records adults elderly "
    "subjects evidence findings assessment monitored therapy regimen duration"
).split()

SECTION_HEADINGS = ["Background", "Methods", "Results", "Discussion"]

# These positives additionally mention their condition label once, so plain
# most-fields retrieval can reach a handful of relevant documents.
LABEL_LEAK_QUERIES = {3, 7, 11, 15, 17}

QUERY_COUNT = 20
DOC_COUNT = 200


def _tokens(text: str) -> set[str]:
    return {t.lower() for t in text.replace("-", " ").split()}


def _check_disjoint() -> None:
    query_tokens = {"does"} | set(VERBS)
    for label, _ in DRUGS + CONDITIONS + [p for pair in MISSING for p in pair]:
        query_tokens |= _tokens(label)
    synonym_tokens: set[str] = set()
    for _, syn in DRUGS + CONDITIONS + [p for pair in MISSING for p in pair]:
        synonym_tokens |= _tokens(syn)
    verb_syn_tokens = {s for syns in VERBS.values() for s in syns}
    filler_tokens = set(FILLER)
    decoy_tokens = set()
    for label, syn in DECOYS:
        decoy_tokens |= _tokens(label) | _tokens(syn)
    hypernym_tokens = set()
    for label in HYPERNYMS:
        hypernym_tokens |= _tokens(label)

    groups = {
        "query": query_tokens,
        "synonym": synonym_tokens,
        "verb_syn": verb_syn_tokens,
        "filler": filler_tokens,
        "decoy": decoy_tokens,
        "hypernym": hypernym_tokens,
    }
    names = list(groups)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            overlap = groups[a] & groups[b]
            assert not overlap, f"{a} and {b} share tokens: {overlap}"


def _sentence(rng: random.Random, words: list[str], n: int) -> str:
    return " ".join(rng.choice(words) for _ in range(n)).capitalize() + "."


def generate(out_dir: str | Path) -> None:
    _check_disjoint()
    rng = random.Random(20240601)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    verbs = list(VERBS)
    pairs = list(zip(DRUGS, CONDITIONS)) + MISSING
    assert len(pairs) == QUERY_COUNT

    queries: list[tuple[str, str]] = []
    qrels: list[tuple[str, str]] = []
    docs: list[dict] = []

    for i, ((drug_label, drug_syn), (cond_label, cond_syn)) in enumerate(pairs, start=1):
        qid = f"q{i:02d}"
        verb = verbs[(i - 1) % len(verbs)]
        verb_syn = VERBS[verb][0]
        queries.append((qid, f"does {drug_label} {verb} {cond_label}"))
        doc_id = f"d{i:03d}"
        qrels.append((qid, doc_id))

        missing_pair = i > len(DRUGS)
        if missing_pair:
            # relevant document for an unmatchable entity: phrased in the verb
            # synonym and filler only
            abstract = (
                f"Interventions that {verb_syn} adverse events were reviewed. "
                + _sentence(rng, FILLER, 12)
            )
            body = [_sentence(rng, FILLER + [verb_syn], 14) for _ in range(3)]
        else:
            abstract = (
                f"{drug_syn.capitalize()} was shown to {verb_syn} {cond_syn} "
                f"in a controlled setting. " + _sentence(rng, FILLER, 10)
            )
            body = [
                f"{drug_syn.capitalize()} administration may {verb_syn} {cond_syn}. "
                + _sentence(rng, FILLER, 12),
                _sentence(rng, FILLER + [verb_syn], 14),
            ]
            if i in LABEL_LEAK_QUERIES:
                body.append(
                    f"Registry notes also mention {cond_label} in passing. "
                    + _sentence(rng, FILLER, 8)
                )
        docs.append(
            {
                "id": doc_id,
                "title": f"Findings on {drug_syn}" if not missing_pair else "Review of interventions",
                "abstract": abstract,
                "sections": [
                    {"heading": SECTION_HEADINGS[j % len(SECTION_HEADINGS)], "text": text}
                    for j, text in enumerate(body)
                ],
                "metadata": {"kind": "positive", "query": qid},
            }
        )

    for j in range(QUERY_COUNT + 1, DOC_COUNT + 1):
        decoy_a = DECOYS[rng.randrange(len(DECOYS))]
        decoy_b = DECOYS[rng.randrange(len(DECOYS))]
        verb = verbs[rng.randrange(len(verbs))]
        title = f"Does {decoy_a[0]} {verb} {decoy_b[0]}"
        abstract = (
            f"We ask whether {decoy_a[1]} can {verb} {decoy_b[1]}. "
            + _sentence(rng, FILLER, 10)
        )
        sections = [
            {
                "heading": SECTION_HEADINGS[s % len(SECTION_HEADINGS)],
                "text": _sentence(rng, FILLER + [verb, decoy_a[0]], 16),
            }
            for s in range(rng.randrange(2, 5))
        ]
        docs.append(
            {
                "id": f"d{j:03d}",
                "title": title,
                "abstract": abstract,
                "sections": sections,
                "metadata": {"kind": "distractor"},
            }
        )

    ontology: list[dict] = []
    hyper_ids = {}
    for label in HYPERNYMS:
        cid = "c_" + label.split()[0]
        hyper_ids[label] = cid
        ontology.append({"id": cid, "label": label, "synonyms": [],
                         "hypernyms": [], "hyponyms": []})

    def concept(label: str, syn: str) -> dict:
        cid = "c_" + label.replace(" ", "_")
        hypers = [hyper_ids[h] for h, members in HYPERNYMS.items() if label in members]
        return {"id": cid, "label": label, "synonyms": [syn],
                "hypernyms": hypers, "hyponyms": []}

    for label, syn in DRUGS + CONDITIONS + DECOYS + [p for pair in MISSING for p in pair]:
        ontology.append(concept(label, syn))
    for entry in ontology:
        for h in entry["hypernyms"]:
            target = next(e for e in ontology if e["id"] == h)
            target["hyponyms"].append(entry["id"])

    with (out / "corpus.jsonl").open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
    with (out / "queries.tsv").open("w", encoding="utf-8") as fh:
        for qid, text in queries:
            fh.write(f"{qid}\t{text}\n")
    with (out / "qrels.tsv").open("w", encoding="utf-8") as fh:
        for qid, doc_id in qrels:
            fh.write(f"{qid}\t{doc_id}\t1\n")
    with (out / "ontology.jsonl").open("w", encoding="utf-8") as fh:
        for entry in ontology:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    with (out / "verbs.tsv").open("w", encoding="utf-8") as fh:
        for verb, syns in VERBS.items():
            fh.write(f"{verb}\t{','.join(syns)}\n")


if __name__ == "__main__":
    generate(Path(__file__).parent / "mldr_sample")
    print("sample dataset written")
