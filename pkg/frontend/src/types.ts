// Shapes of the docfunnel service responses consumed by the funnel UI.

export type Tier = "exact" | "synonym" | "hyponym" | "hypernym";
export type Origin = "entity" | "verb" | "text";
export type ClauseKind = "must" | "should";

export interface ClauseVariation {
  text: string;
  weight: number;
  tier: Tier;
}

export interface ClauseGroup {
  origin: Origin;
  boost: number;
  variations: ClauseVariation[];
}

export interface ClauseTree {
  must: ClauseGroup[];
  should: ClauseGroup[];
}

export interface EntityMention {
  surface: string;
  start: number;
  end: number;
  concept_id: string;
}

export interface PreviewResponse {
  query: string;
  mentions: EntityMention[];
  tree: ClauseTree;
}

export interface SearchResult {
  rank: number;
  doc_id: string;
  score: number;
  title: string;
  snippet: string;
}

export interface SearchResponse {
  results: SearchResult[];
  trace_id: string;
  session_id: string;
}

export interface TraceEvent {
  ordinal: number;
  stage: string;
  payload: Record<string, unknown>;
  timestamp?: number;
}

export interface TraceResponse {
  trace_id: string;
  events: TraceEvent[];
}

export interface DocumentChunk {
  chunk_id: number;
  source_field: "title" | "abstract" | "section";
  section_index: number | null;
  text: string;
  token_count: number;
}

export interface DocumentView {
  id: string;
  title: string;
  abstract: string;
  sections: { heading: string; text: string }[];
  metadata: Record<string, string>;
  chunks: DocumentChunk[];
}

export interface Passage {
  chunk_id: number;
  start: number;
  end: number;
  text: string;
  score: number;
}

export interface ChainEvidence {
  chunk_id: number;
  score: number;
  excerpt: string;
}

export interface ChainStep {
  hop: number;
  evidence: ChainEvidence[];
}

export type AskOutput = "extractive" | "chain" | "packed";

export interface AskResponse {
  question: string;
  doc_id: string;
  output: AskOutput;
  trace_id: string;
  session_id: string;
  answer: string;
  passages?: Passage[];
  chain?: ChainStep[];
  context?: number[];
  context_texts?: string[];
}

export interface ApiError {
  code: string;
  message: string;
  detail?: unknown;
}
