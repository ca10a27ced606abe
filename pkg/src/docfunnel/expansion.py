"""Ontology-driven query expansion into MUST/SHOULD clause trees.

Entities are detected with a gazetteer over ontology labels and synonyms
(longest span wins, then leftmost); a pluggable tagger can replace the
gazetteer. Detected entities expand to synonyms and 1-hop hypernyms and
hyponyms; verbs outside entity spans expand through a flat synonym lexicon.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .analysis import tokenize_with_spans
from .errors import DocfunnelError, EmptyQuery, ParseError, UnknownConcept
from .plan import QueryPlan, Variation, VariationGroup
from .trace import Trace

STRATEGIES = ("most-fields", "must-expansion", "should-expansion")

# Expansion tiers carry decreasing precision.
TIER_WEIGHTS = {"exact": 1.0, "synonym": 0.8, "hyponym": 0.6, "hypernym": 0.4}

ENTITY_BOOST = 2.0
VERB_BOOST = 1.0
RESIDUAL_BOOST = 0.5

# An external tagger maps a query to (surface, start, end, concept_id) tuples.
EntityTagger = Callable[[str], list[tuple[str, int, int, str]]]


@dataclass(frozen=True)
class OntologyEntry:
    concept_id: str
    label: str
    synonyms: tuple[str, ...] = ()
    hypernyms: tuple[str, ...] = ()
    hyponyms: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.label:
            raise DocfunnelError(f"concept {self.concept_id!r} has an empty label")


@dataclass(frozen=True)
class EntityMention:
    surface: str
    start: int
    end: int
    concept_id: str


@dataclass(frozen=True)
class ExpansionSet:
    concept_id: str
    variations: tuple[Variation, ...]


class Ontology:
    """Concept store indexed by id and by lowercased label/synonym phrases."""

    def __init__(self, entries: dict[str, OntologyEntry]):
        self.entries = entries
        # phrase (token tuple) -> concept_id; first registration wins so
        # labels take priority over later synonyms
        self.gazetteer: dict[tuple[str, ...], str] = {}
        self.max_phrase_tokens = 0
        for entry in entries.values():
            for phrase in (entry.label, *entry.synonyms):
                key = tuple(t for t, _, _ in tokenize_with_spans(phrase))
                if not key:
                    continue
                self.gazetteer.setdefault(key, entry.concept_id)
                self.max_phrase_tokens = max(self.max_phrase_tokens, len(key))

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self.entries

    def get(self, concept_id: str) -> OntologyEntry:
        if concept_id not in self.entries:
            raise UnknownConcept(concept_id)
        return self.entries[concept_id]


def load_ontology(path: str | Path) -> tuple[Ontology, list[str]]:
    """Load a line-delimited ontology; returns (ontology, dangling warnings).

    Hypernym/hyponym links to missing concepts are dropped with a warning;
    duplicate concept ids are a hard parse error.
    """
    path = Path(path)
    raw: dict[str, dict] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad ontology record: {exc}", line=lineno)
            cid = rec.get("id")
            if not cid:
                raise ParseError("ontology record missing id", line=lineno)
            if cid in raw:
                raise ParseError(f"duplicate concept_id {cid!r}", line=lineno)
            raw[cid] = rec

    warnings: list[str] = []
    entries: dict[str, OntologyEntry] = {}
    for cid, rec in raw.items():
        def resolve(ids: list[str], relation: str) -> tuple[str, ...]:
            kept = []
            for ref in ids:
                if ref in raw:
                    kept.append(ref)
                else:
                    warnings.append(f"{cid}: dangling {relation} reference {ref!r}")
            return tuple(kept)

        entries[cid] = OntologyEntry(
            concept_id=cid,
            label=rec.get("label", ""),
            synonyms=tuple(rec.get("synonyms", ())),
            hypernyms=resolve(rec.get("hypernyms", ()), "hypernym"),
            hyponyms=resolve(rec.get("hyponyms", ()), "hyponym"),
        )
    return Ontology(entries), warnings


def load_verb_lexicon(path: str | Path) -> dict[str, list[str]]:
    """Tab-separated `verb<TAB>syn1,syn2,...` lexicon."""
    lexicon: dict[str, list[str]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected verb<TAB>synonyms: {line!r}", line=lineno)
            verb = parts[0].strip().lower()
            syns = [s.strip().lower() for s in parts[1].split(",") if s.strip()]
            lexicon[verb] = syns
    return lexicon


def extract_entities(
    query: str, ontology: Ontology, trace: Trace | None = None
) -> list[EntityMention]:
    """Gazetteer scan: longest span wins, leftmost breaks ties, no overlaps."""
    tokens = tokenize_with_spans(query)
    candidates: list[EntityMention] = []
    for i in range(len(tokens)):
        limit = min(len(tokens), i + max(ontology.max_phrase_tokens, 1))
        for j in range(limit, i, -1):
            key = tuple(t for t, _, _ in tokens[i:j])
            cid = ontology.gazetteer.get(key)
            if cid is not None:
                start, end = tokens[i][1], tokens[j - 1][2]
                candidates.append(
                    EntityMention(surface=query[start:end], start=start, end=end, concept_id=cid)
                )

    candidates.sort(key=lambda m: (-(m.end - m.start), m.start))
    selected: list[EntityMention] = []
    for cand in candidates:
        if all(cand.end <= m.start or cand.start >= m.end for m in selected):
            selected.append(cand)
    selected.sort(key=lambda m: m.start)

    if trace is not None:
        trace.add(
            "entities",
            {
                "query": query,
                "mentions": [
                    {
                        "surface": m.surface,
                        "start": m.start,
                        "end": m.end,
                        "concept_id": m.concept_id,
                    }
                    for m in selected
                ],
            },
        )
    return selected


def expand_entity(concept_id: str, ontology: Ontology) -> ExpansionSet:
    """Exact label, synonyms, then 1-hop hyponym and hypernym labels."""
    entry = ontology.get(concept_id)
    variations: list[Variation] = [Variation(entry.label, TIER_WEIGHTS["exact"], "exact")]
    seen = {entry.label.lower()}

    def push(text: str, tier: str):
        if text.lower() not in seen:
            seen.add(text.lower())
            variations.append(Variation(text, TIER_WEIGHTS[tier], tier))

    for syn in entry.synonyms:
        push(syn, "synonym")
    for ref in entry.hyponyms:
        push(ontology.entries[ref].label, "hyponym")
    for ref in entry.hypernyms:
        push(ontology.entries[ref].label, "hypernym")
    return ExpansionSet(concept_id=concept_id, variations=tuple(variations))


def expand_verbs(
    query: str,
    mentions: list[EntityMention],
    lexicon: dict[str, list[str]],
    trace: Trace | None = None,
) -> list[VariationGroup]:
    """Lexicon verbs outside entity spans become SHOULD variation groups."""
    groups: list[VariationGroup] = []
    for token, start, end in tokenize_with_spans(query):
        if any(start < m.end and end > m.start for m in mentions):
            continue
        syns = lexicon.get(token)
        if syns is None:
            continue
        variations = [Variation(token, 1.0, "exact")]
        seen = {token}
        for s in syns:
            if s not in seen:
                seen.add(s)
                variations.append(Variation(s, 0.8, "synonym"))
        groups.append(VariationGroup(origin="verb", variations=tuple(variations), boost=VERB_BOOST))
    if trace is not None:
        trace.add(
            "expansion",
            {"verbs": [[v.text for v in g.variations] for g in groups]},
        )
    return groups


def _residual_tokens(query: str, mentions: list[EntityMention], verb_tokens: set[str]) -> list[str]:
    residual = []
    for token, start, end in tokenize_with_spans(query):
        if any(start < m.end and end > m.start for m in mentions):
            continue
        if token in verb_tokens:
            continue
        residual.append(token)
    return residual


def build_query_plan(
    query: str,
    strategy: str,
    ontology: Ontology | None = None,
    lexicon: dict[str, list[str]] | None = None,
    trace: Trace | None = None,
    tagger: EntityTagger | None = None,
) -> QueryPlan:
    """Build the clause tree for one of the three strategies.

    most-fields: the raw query as a single SHOULD group, no expansion.
    must-expansion: entity expansions as MUST groups, verbs and residual
    tokens as SHOULD.  should-expansion: identical but entities are SHOULD.
    """
    if strategy not in STRATEGIES:
        raise DocfunnelError(f"unknown strategy: {strategy!r}")
    if not [t for t, _, _ in tokenize_with_spans(query)]:
        raise EmptyQuery("query has no analyzable tokens")

    if strategy == "most-fields":
        plan = QueryPlan(
            should_clauses=(
                VariationGroup(
                    origin="text",
                    variations=(Variation(query.strip(), 1.0, "exact"),),
                    boost=1.0,
                ),
            )
        )
        if trace is not None:
            trace.add("plan", {"strategy": strategy, "tree": plan.to_record()})
        return plan

    if ontology is None:
        raise DocfunnelError(f"strategy {strategy!r} requires an ontology")

    if tagger is not None:
        mentions = [
            EntityMention(surface=s, start=a, end=b, concept_id=c)
            for s, a, b, c in tagger(query)
        ]
        if trace is not None:
            trace.add(
                "entities",
                {
                    "query": query,
                    "mentions": [
                        {"surface": m.surface, "start": m.start, "end": m.end,
                         "concept_id": m.concept_id}
                        for m in mentions
                    ],
                },
            )
    else:
        mentions = extract_entities(query, ontology, trace=trace)

    expansions = [expand_entity(m.concept_id, ontology) for m in mentions]
    entity_groups = tuple(
        VariationGroup(origin="entity", variations=e.variations, boost=ENTITY_BOOST)
        for e in expansions
    )
    verb_groups = tuple(expand_verbs(query, mentions, lexicon or {}))
    verb_tokens = {g.variations[0].text for g in verb_groups}
    if trace is not None:
        trace.add(
            "expansion",
            {
                "entities": [
                    {
                        "concept_id": e.concept_id,
                        "variations": [
                            {"text": v.text, "weight": v.weight, "tier": v.tier}
                            for v in e.variations
                        ],
                    }
                    for e in expansions
                ],
                "verbs": [[v.text for v in g.variations] for g in verb_groups],
            },
        )

    should: list[VariationGroup] = list(verb_groups)
    residual = _residual_tokens(query, mentions, verb_tokens)
    if residual:
        should.append(
            VariationGroup(
                origin="text",
                variations=(Variation(" ".join(residual), 1.0, "exact"),),
                boost=RESIDUAL_BOOST,
            )
        )

    if strategy == "must-expansion":
        plan = QueryPlan(must_clauses=entity_groups, should_clauses=tuple(should))
    else:
        plan = QueryPlan(should_clauses=entity_groups + tuple(should))

    if trace is not None:
        trace.add("plan", {"strategy": strategy, "tree": plan.to_record()})
    return plan
