import type { DecisionBody, MediaKind, QueueResponse, Stats } from "./types.js";

export class ConflictError extends Error {}

/** Thin client for the review routes; fetch is injectable for tests. */
export class ReviewApi {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  mediaUrl(trackId: string, kind: MediaKind, frame: number): string {
    return `${this.baseUrl}/api/review/${encodeURIComponent(trackId)}/media/${kind}?frame=${frame}`;
  }

  async queue(): Promise<QueueResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/review/queue`);
    if (!resp.ok) throw new Error(`queue failed: ${resp.status}`);
    return (await resp.json()) as QueueResponse;
  }

  async stats(): Promise<Stats> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/stats`);
    if (!resp.ok) throw new Error(`stats failed: ${resp.status}`);
    return (await resp.json()) as Stats;
  }

  async decide(trackId: string, body: DecisionBody): Promise<void> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/review/${encodeURIComponent(trackId)}`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (resp.status === 409) throw new ConflictError(`${trackId} already decided`);
    if (!resp.ok) throw new Error(`decision failed: ${resp.status}`);
  }
}
