/**
 * Typed client for the coordinator's HTTP API.
 *
 * Every request in the UI goes through this module, and only to the
 * documented /api endpoints. Queries are JSON unless an image is attached,
 * in which case they go out as multipart form data.
 */

export interface MilestoneSnapshot {
  stages: Record<string, string>;
  details: Record<string, string>;
  llm_only: boolean;
  configured?: boolean;
}

export interface ResultRow {
  rank: number;
  id: string;
  distance: number;
}

export interface SearchStats {
  visited: number;
  full_evals: number;
  abandoned: number;
}

export interface QueryResponse {
  session_id: string;
  turn: number;
  answer: string;
  degraded: boolean;
  results: ResultRow[];
  stats: SearchStats;
}

export interface FrameworkColumn {
  latency_ms: number;
  error?: string;
  results?: ResultRow[];
  stats?: SearchStats;
}

export interface CompareResponse {
  frameworks: Record<string, FrameworkColumn>;
}

export interface QueryRequest {
  sessionId: string;
  text?: string;
  selectedId?: string | null;
  image?: Blob | null;
  k?: number;
  L?: number;
  framework?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(
      response.status,
      body.code ?? "http_error",
      body.message ?? `HTTP ${response.status}`,
      body.field,
    );
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async postConfig(config: unknown): Promise<MilestoneSnapshot> {
    const response = await fetch(this.url("/api/config"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    });
    return parseOrThrow(response);
  }

  async getStatus(): Promise<MilestoneSnapshot> {
    return parseOrThrow(await fetch(this.url("/api/status")));
  }

  async openSession(): Promise<string> {
    const body = await parseOrThrow<{ session_id: string }>(
      await fetch(this.url("/api/session"), { method: "POST" }),
    );
    return body.session_id;
  }

  /** JSON for text-only turns; multipart as soon as an image is attached. */
  queryPayload(request: QueryRequest): { body: FormData | string; isMultipart: boolean } {
    const fields: Record<string, string> = { session_id: request.sessionId };
    if (request.text) fields.text = request.text;
    if (request.selectedId) fields.selected_id = request.selectedId;
    if (request.k !== undefined) fields.k = String(request.k);
    if (request.L !== undefined) fields.L = String(request.L);
    if (request.framework) fields.framework = request.framework;

    if (request.image) {
      const form = new FormData();
      for (const [key, value] of Object.entries(fields)) form.append(key, value);
      form.append("image", request.image, "upload");
      return { body: form, isMultipart: true };
    }
    return { body: JSON.stringify(fields), isMultipart: false };
  }

  async submitQuery(request: QueryRequest): Promise<QueryResponse> {
    const { body, isMultipart } = this.queryPayload(request);
    const response = await fetch(this.url("/api/query"), {
      method: "POST",
      // multipart boundary headers are the browser's job
      headers: isMultipart ? undefined : { "content-type": "application/json" },
      body,
    });
    return parseOrThrow(response);
  }

  async compare(request: QueryRequest): Promise<CompareResponse> {
    const { body, isMultipart } = this.queryPayload(request);
    const response = await fetch(this.url("/api/compare"), {
      method: "POST",
      headers: isMultipart ? undefined : { "content-type": "application/json" },
      body,
    });
    return parseOrThrow(response);
  }

  payloadUrl(objectId: string, modality: string): string {
    return this.url(
      `/api/objects/${encodeURIComponent(objectId)}/payload/${encodeURIComponent(modality)}`,
    );
  }
}
