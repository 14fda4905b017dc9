import { QueryJson, QueryResponse } from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  private seq = 0;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  // At most one query is considered in flight: responses that are not the
  // latest request are discarded (null) so slow answers never overwrite
  // newer ones.
  async query(body: QueryJson, top?: number): Promise<QueryResponse | null> {
    const id = ++this.seq;
    const url =
      top === undefined
        ? `${this.baseUrl}/query`
        : `${this.baseUrl}/query?top=${top}`;
    const res = await this.fetchImpl(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (id !== this.seq) return null; // stale
    if (!res.ok) {
      const payload = (await res.json()) as { error?: string };
      throw new ApiError(res.status, payload.error ?? `HTTP ${res.status}`);
    }
    return (await res.json()) as QueryResponse;
  }

  async hypothesis(docId: string, hyp: string): Promise<unknown> {
    const res = await this.fetchImpl(
      `${this.baseUrl}/documents/${encodeURIComponent(docId)}/hypotheses/${hyp}`,
    );
    if (!res.ok) throw new ApiError(res.status, `HTTP ${res.status}`);
    return res.json();
  }

  imageUrl(docId: string): string {
    return `${this.baseUrl}/documents/${encodeURIComponent(docId)}/image`;
  }
}
