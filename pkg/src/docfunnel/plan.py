"""Boolean clause trees: MUST/SHOULD groups of weighted term variations.

Produced by the expansion module, executed by the sparse index, edited by
clients through the exported clause-tree record format.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DocfunnelError

TIERS = ("exact", "synonym", "hyponym", "hypernym")
ORIGINS = ("entity", "verb", "text")


@dataclass(frozen=True)
class Variation:
    text: str
    weight: float = 1.0
    tier: str = "exact"

    def __post_init__(self):
        if not 0 < self.weight <= 1:
            raise DocfunnelError(f"variation weight must be in (0, 1]: {self.weight}")
        if self.tier not in TIERS:
            raise DocfunnelError(f"unknown tier: {self.tier!r}")


@dataclass(frozen=True)
class VariationGroup:
    origin: str  # entity | verb | text
    variations: tuple[Variation, ...]
    boost: float = 1.0

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise DocfunnelError(f"unknown origin: {self.origin!r}")
        if not self.variations:
            raise DocfunnelError("variation group needs at least one variation")
        if self.boost <= 0:
            raise DocfunnelError("group boost must be > 0")


@dataclass(frozen=True)
class QueryPlan:
    must_clauses: tuple[VariationGroup, ...] = ()
    should_clauses: tuple[VariationGroup, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.must_clauses and not self.should_clauses

    def to_record(self) -> dict:
        def group(g: VariationGroup) -> dict:
            return {
                "origin": g.origin,
                "boost": g.boost,
                "variations": [
                    {"text": v.text, "weight": v.weight, "tier": v.tier}
                    for v in g.variations
                ],
            }

        return {
            "must": [group(g) for g in self.must_clauses],
            "should": [group(g) for g in self.should_clauses],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "QueryPlan":
        def group(g: dict) -> VariationGroup:
            return VariationGroup(
                origin=g["origin"],
                boost=float(g["boost"]),
                variations=tuple(
                    Variation(
                        text=v["text"],
                        weight=float(v.get("weight", 1.0)),
                        tier=v.get("tier", "exact"),
                    )
                    for v in g["variations"]
                ),
            )

        return cls(
            must_clauses=tuple(group(g) for g in rec.get("must", [])),
            should_clauses=tuple(group(g) for g in rec.get("should", [])),
        )
