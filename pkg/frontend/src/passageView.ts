// Document rendering with extractive passage highlights.
//
// Passages address spans inside chunk texts. A span that does not slice its
// chunk exactly signals server/client version skew and is surfaced as a
// SpanMismatchError rather than silently dropped.

import type { ChainStep, DocumentView, Passage } from "./types.js";

export class SpanMismatchError extends Error {
  constructor(
    public readonly chunkId: number,
    public readonly expected: string,
    public readonly actual: string,
  ) {
    super(
      `passage span mismatch in chunk ${chunkId}: ` +
        `expected ${JSON.stringify(expected)}, sliced ${JSON.stringify(actual)}`,
    );
    this.name = "SpanMismatchError";
  }
}

export interface TextSegment {
  text: string;
  highlighted: boolean;
  /** 1-based passage order when highlighted */
  passageRank?: number;
}

export interface AnnotatedChunk {
  chunkId: number;
  sourceField: string;
  anchorId: string;
  segments: TextSegment[];
  highlightCount: number;
}

export interface AnnotatedDocument {
  docId: string;
  title: string;
  chunks: AnnotatedChunk[];
  /** shown when there are no passages at all */
  noEvidence: boolean;
}

export function chunkAnchorId(docId: string, chunkId: number): string {
  return `chunk-${docId}-${chunkId}`;
}

export function highlightPassages(
  doc: DocumentView,
  passages: Passage[],
): AnnotatedDocument {
  const byChunk = new Map<number, Passage[]>();
  passages.forEach((p, i) => {
    const chunk = doc.chunks.find((c) => c.chunk_id === p.chunk_id);
    if (chunk === undefined) {
      throw new SpanMismatchError(p.chunk_id, p.text, "<no such chunk>");
    }
    const sliced = chunk.text.slice(p.start, p.end);
    if (sliced !== p.text) {
      throw new SpanMismatchError(p.chunk_id, p.text, sliced);
    }
    const list = byChunk.get(p.chunk_id) ?? [];
    list.push(p);
    byChunk.set(p.chunk_id, list);
  });

  const ranks = new Map<Passage, number>();
  passages.forEach((p, i) => ranks.set(p, i + 1));

  const chunks: AnnotatedChunk[] = doc.chunks.map((chunk) => {
    const spans = (byChunk.get(chunk.chunk_id) ?? [])
      .slice()
      .sort((a, b) => a.start - b.start);
    const segments: TextSegment[] = [];
    let cursor = 0;
    for (const p of spans) {
      if (p.start > cursor) {
        segments.push({ text: chunk.text.slice(cursor, p.start), highlighted: false });
      }
      segments.push({
        text: chunk.text.slice(p.start, p.end),
        highlighted: true,
        passageRank: ranks.get(p),
      });
      cursor = Math.max(cursor, p.end);
    }
    if (cursor < chunk.text.length) {
      segments.push({ text: chunk.text.slice(cursor), highlighted: false });
    }
    if (segments.length === 0) {
      segments.push({ text: chunk.text, highlighted: false });
    }
    return {
      chunkId: chunk.chunk_id,
      sourceField: chunk.source_field,
      anchorId: chunkAnchorId(doc.id, chunk.chunk_id),
      segments,
      highlightCount: spans.length,
    };
  });

  return {
    docId: doc.id,
    title: doc.title,
    chunks,
    noEvidence: passages.length === 0,
  };
}

/** Anchor targets for one chain step: where clicking the step scrolls to. */
export function chainStepAnchors(docId: string, step: ChainStep): string[] {
  return step.evidence.map((e) => chunkAnchorId(docId, e.chunk_id));
}
