// Thin typed client over fetch. Every mutation the console performs goes
// through here; there is no other channel to the engine. Non-2xx responses
// become ApiError with the service's own error/detail fields so panels can
// surface codes verbatim.

import type {
  AuditResponse,
  InjectBody,
  InjectResponse,
  MetricsResponse,
  PendingResponse,
  ResolveResponse,
  StateResponse,
  TickResponse,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; text(): Promise<string> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${status} ${code}: ${detail}`);
  }
}

async function parseBody(res: { status: number; text(): Promise<string> }): Promise<unknown> {
  const raw = await res.text();
  let body: unknown = null;
  try {
    body = raw === "" ? null : JSON.parse(raw);
  } catch {
    body = null;
  }
  if (res.status >= 200 && res.status < 300) return body;
  const err = (body ?? {}) as { error?: string; detail?: string };
  throw new ApiError(res.status, err.error ?? "unknown", err.detail ?? raw);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private url(path: string, query?: Record<string, string | number | undefined>): string {
    const base = this.baseUrl.replace(/\/$/, "");
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(query ?? {})) {
      if (value !== undefined) params.set(key, String(value));
    }
    const qs = params.toString();
    return `${base}/v1${path}${qs ? `?${qs}` : ""}`;
  }

  private async get(path: string, query?: Record<string, string | number | undefined>): Promise<unknown> {
    return parseBody(await this.fetchImpl(this.url(path, query)));
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    return parseBody(
      await this.fetchImpl(this.url(path), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async state(query?: { sector?: string; k?: number; status?: string }): Promise<StateResponse> {
    return (await this.get("/state", query)) as StateResponse;
  }

  async metrics(): Promise<MetricsResponse> {
    return (await this.get("/metrics")) as MetricsResponse;
  }

  // wait is clamped server-side at 2000 ms; the console never asks for more.
  async audit(since: number, waitMs?: number): Promise<AuditResponse> {
    return (await this.get("/audit", { since, wait: waitMs })) as AuditResponse;
  }

  async pending(): Promise<PendingResponse> {
    return (await this.get("/pending")) as PendingResponse;
  }

  async inject(body: InjectBody): Promise<InjectResponse> {
    return (await this.post("/inject", body)) as InjectResponse;
  }

  async tick(count: number): Promise<TickResponse> {
    return (await this.post("/tick", { count })) as TickResponse;
  }

  async resolvePending(
    id: number,
    verdict: "approve" | "reject",
    actor: string,
    token: string,
  ): Promise<ResolveResponse> {
    return (await this.post(`/pending/${id}/${verdict}`, { actor, token })) as ResolveResponse;
  }

  async retire(fragmentId: number, actor: string, token: string): Promise<ResolveResponse> {
    return (await this.post(`/beliefs/${fragmentId}/retire`, { actor, token })) as ResolveResponse;
  }

  async annihilate(sector: string, actor: string, token: string): Promise<ResolveResponse> {
    return (await this.post(`/sectors/${sector}/annihilate`, { actor, token })) as ResolveResponse;
  }
}
