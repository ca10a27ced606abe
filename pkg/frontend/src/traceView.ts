// Step-through timeline over trace events: every pipeline stage becomes one
// node, dense hops expand to per-chunk scores, and the fusion stage renders
// the sparse-rank / dense-rank / fused-score table.

import type { TraceEvent } from "./types.js";

export interface HopRow {
  chunkId: number;
  score: number;
}

export interface FusionRow {
  chunkId: number;
  fusedScore: number;
  sparseRank: number | null;
  denseRank: number | null;
}

export interface RankedRow {
  rank: number;
  id: string | number;
  score: number;
}

export interface TimelineNode {
  ordinal: number;
  stage: string;
  label: string;
  /** hop nodes carry per-chunk scores and are expandable */
  hopRows?: HopRow[];
  /** the fusion node carries the rank table */
  fusionRows?: FusionRow[];
  /** retrieve/sparse/rerank nodes carry a ranked list */
  rankedRows?: RankedRow[];
  /** raw payload for the generic inspector */
  payload: Record<string, unknown>;
}

export interface TraceViewModel {
  nodes: TimelineNode[];
  hopCount: number;
  /** true when a retrieval stage executed but returned nothing */
  emptyResult: boolean;
}

const STAGE_LABELS: Record<string, string> = {
  entities: "Entity detection",
  expansion: "Ontology expansion",
  plan: "Clause tree",
  retrieve: "Ranked documents",
  chunking: "Chunking",
  sparse: "Sparse chunk search",
  fusion: "Rank fusion",
  rerank: "Reranking",
  extract: "Extracted passages",
  chain: "Reasoning chain",
  pack: "Context pack",
};

function labelFor(stage: string): string {
  if (stage.startsWith("dense-hop-")) {
    return `Dense hop ${stage.slice("dense-hop-".length)}`;
  }
  return STAGE_LABELS[stage] ?? stage;
}

interface ScoredChunkPayload {
  chunk_id: number;
  score: number;
}

interface RankedPayload {
  rank: number;
  doc_id?: string;
  chunk_id?: number;
  score: number;
}

export function buildTraceView(events: TraceEvent[]): TraceViewModel {
  let hopCount = 0;
  let emptyResult = false;
  const nodes: TimelineNode[] = events.map((event) => {
    const node: TimelineNode = {
      ordinal: event.ordinal,
      stage: event.stage,
      label: labelFor(event.stage),
      payload: event.payload,
    };
    if (event.stage.startsWith("dense-hop-")) {
      hopCount += 1;
      const selected = (event.payload["selected"] ?? []) as ScoredChunkPayload[];
      node.hopRows = selected.map((s) => ({ chunkId: s.chunk_id, score: s.score }));
    } else if (event.stage === "fusion") {
      const entries = (event.payload["entries"] ?? []) as {
        chunk_id: number;
        score: number;
        sparse_rank: number | null;
        dense_rank: number | null;
      }[];
      node.fusionRows = entries.map((e) => ({
        chunkId: e.chunk_id,
        fusedScore: e.score,
        sparseRank: e.sparse_rank,
        denseRank: e.dense_rank,
      }));
    } else if (["retrieve", "sparse", "rerank"].includes(event.stage)) {
      const results = (event.payload["results"] ?? []) as RankedPayload[];
      node.rankedRows = results.map((r) => ({
        rank: r.rank,
        id: r.doc_id ?? r.chunk_id ?? "?",
        score: r.score,
      }));
      if (event.stage === "retrieve" && results.length === 0) {
        emptyResult = true;
      }
    }
    return node;
  });
  return { nodes, hopCount, emptyResult };
}

/** Raw score formatting used everywhere: four decimals, no rounding frills. */
export function formatScore(score: number): string {
  return score.toFixed(4);
}
