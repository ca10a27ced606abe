// Funnel state machine: query → expansion → results → document → answer.
//
// Steps advance strictly in funnel order (answering requires a selected
// document) and back-navigation re-opens an earlier access point without
// losing later inputs. Each step keeps at most one request in flight;
// responses superseded by a newer request are discarded by sequence number.

import { FunnelApi } from "./api.js";
import { buildClauseView, emitTree, type ClausePanelModel } from "./clausePanel.js";
import type {
  AskOutput,
  AskResponse,
  DocumentView,
  EntityMention,
  SearchResult,
  TraceEvent,
} from "./types.js";

export type FunnelStep = "query" | "expansion" | "results" | "document" | "answer";

const STEP_ORDER: FunnelStep[] = ["query", "expansion", "results", "document", "answer"];

export interface FunnelState {
  step: FunnelStep;
  query: string;
  mentions: EntityMention[];
  panel: ClausePanelModel | null;
  results: SearchResult[] | null;
  searchTraceId: string | null;
  selectedDoc: DocumentView | null;
  answer: AskResponse | null;
  traceEvents: TraceEvent[] | null;
  sessionId: string | null;
  error: string | null;
  pending: boolean;
}

export function initialState(): FunnelState {
  return {
    step: "query",
    query: "",
    mentions: [],
    panel: null,
    results: null,
    searchTraceId: null,
    selectedDoc: null,
    answer: null,
    traceEvents: null,
    sessionId: null,
    error: null,
    pending: false,
  };
}

export function stepIndex(step: FunnelStep): number {
  return STEP_ORDER.indexOf(step);
}

/** Funnel order is enforced: forward only to the next step, back to any. */
export function canTransition(state: FunnelState, to: FunnelStep): boolean {
  const from = stepIndex(state.step);
  const target = stepIndex(to);
  if (target <= from) return true; // back-navigation is always allowed
  if (target !== from + 1) return false;
  if (to === "answer") return state.selectedDoc !== null;
  return true;
}

export class FunnelController {
  state: FunnelState = initialState();
  private seq = 0;
  private listeners: ((state: FunnelState) => void)[] = [];

  constructor(private readonly api: FunnelApi) {}

  onChange(listener: (state: FunnelState) => void): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<FunnelState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  private stale(seq: number): boolean {
    return seq !== this.seq;
  }

  goBack(to: FunnelStep): void {
    if (!canTransition(this.state, to)) return;
    if (stepIndex(to) < stepIndex(this.state.step)) {
      this.update({ step: to, error: null });
    }
  }

  /** Step 1 → 2: preview the expansion for an entered query. */
  async loadExpansion(query: string): Promise<void> {
    if (!query.trim()) {
      this.update({ error: "query must be non-empty" });
      return;
    }
    const seq = this.nextSeq();
    this.update({ query, pending: true, error: null });
    try {
      const preview = await this.api.previewExpansion(query);
      if (this.stale(seq)) return;
      this.update({
        step: "expansion",
        mentions: preview.mentions,
        panel: buildClauseView(preview.tree),
        pending: false,
      });
    } catch (err) {
      if (this.stale(seq)) return;
      this.update({ pending: false, error: String(err) });
    }
  }

  /** Step 2 → 3: execute the (possibly edited) clause tree. */
  async runSearch(k = 10): Promise<void> {
    if (this.state.panel === null) {
      this.update({ error: "no clause tree to execute" });
      return;
    }
    const plan = emitTree(this.state.panel);
    const seq = this.nextSeq();
    this.update({ pending: true, error: null });
    try {
      const response = await this.api.search({
        plan,
        k,
        session_id: this.state.sessionId ?? undefined,
      });
      if (this.stale(seq)) return;
      this.update({
        step: "results",
        results: response.results,
        searchTraceId: response.trace_id,
        sessionId: response.session_id,
        pending: false,
      });
    } catch (err) {
      if (this.stale(seq)) return;
      this.update({ pending: false, error: String(err) });
    }
  }

  /** Step 3 → 4: pick one document from the ranked list. */
  async selectDocument(docId: string): Promise<void> {
    const seq = this.nextSeq();
    this.update({ pending: true, error: null });
    try {
      const doc = await this.api.getDocument(docId);
      if (this.stale(seq)) return;
      this.update({ step: "document", selectedDoc: doc, pending: false });
    } catch (err) {
      if (this.stale(seq)) return;
      this.update({ pending: false, error: String(err) });
    }
  }

  /** Step 4 → 5: ask inside the selected document. */
  async ask(question: string, output: AskOutput = "extractive"): Promise<void> {
    const doc = this.state.selectedDoc;
    if (doc === null) {
      this.update({ error: "select a document before asking" });
      return;
    }
    const seq = this.nextSeq();
    this.update({ pending: true, error: null });
    try {
      const answer = await this.api.ask({
        doc_id: doc.id,
        question,
        output,
        session_id: this.state.sessionId ?? undefined,
      });
      if (this.stale(seq)) return;
      const trace = await this.api.getTrace(answer.trace_id);
      if (this.stale(seq)) return;
      this.update({
        step: "answer",
        answer,
        traceEvents: trace.events,
        pending: false,
      });
    } catch (err) {
      if (this.stale(seq)) return;
      this.update({ pending: false, error: String(err) });
    }
  }

  /** Fetch the trace behind the current search results. */
  async loadSearchTrace(): Promise<TraceEvent[] | null> {
    if (this.state.searchTraceId === null) return null;
    const trace = await this.api.getTrace(this.state.searchTraceId);
    this.update({ traceEvents: trace.events });
    return trace.events;
  }
}
