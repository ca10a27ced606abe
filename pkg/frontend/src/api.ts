// Thin client over the docfunnel HTTP endpoints. The fetch function is
// injectable so view-model tests run without a browser or a server.

import type {
  AskOutput,
  AskResponse,
  ClauseTree,
  DocumentView,
  PreviewResponse,
  SearchResponse,
  TraceResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class FunnelApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, body === undefined
      ? undefined
      : {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify(body),
        });
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      throw new ApiError(
        response.status,
        String(payload["code"] ?? "internal"),
        String(payload["message"] ?? "request failed"),
      );
    }
    return payload as T;
  }

  search(body: {
    query?: string;
    strategy?: string;
    k?: number;
    plan?: ClauseTree;
    session_id?: string;
  }): Promise<SearchResponse> {
    return this.request<SearchResponse>("/search", body);
  }

  previewExpansion(query: string): Promise<PreviewResponse> {
    return this.request<PreviewResponse>("/expansion/preview", { query });
  }

  ask(body: {
    doc_id: string;
    question: string;
    output: AskOutput;
    session_id?: string;
  }): Promise<AskResponse> {
    return this.request<AskResponse>("/ask", body);
  }

  getTrace(traceId: string): Promise<TraceResponse> {
    return this.request<TraceResponse>(`/trace/${traceId}`);
  }

  getDocument(docId: string): Promise<DocumentView> {
    return this.request<DocumentView>(`/documents/${docId}`);
  }
}
