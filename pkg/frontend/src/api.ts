import type {
  CloudsPayload,
  FieldPayload,
  IterationResponse,
  Mitigation,
  RegionResponse,
  RegionsPayload,
  SessionSummary,
  VoxelKeyTuple,
} from "./types.js";

/** Minimal fetch signature so tests can hand in a fake transport. */
export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/**
 * Typed client over the workbench JSON API. One instance per session
 * server; every method resolves to the parsed payload or rejects with
 * an ApiError carrying the server's {code, message} body.
 */
export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? globalThis.fetch.bind(globalThis);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    if (!resp.ok) {
      const err = (body ?? {}) as Partial<{ code: string; message: string }>;
      throw new ApiError(
        resp.status,
        typeof err.code === "string" ? err.code : "http_error",
        typeof err.message === "string" ? err.message : `HTTP ${resp.status}`,
      );
    }
    return body as T;
  }

  getSession(): Promise<SessionSummary> {
    return this.request("/api/session");
  }

  getField(iteration: number): Promise<FieldPayload> {
    return this.request(`/api/field/${iteration}`);
  }

  getClouds(iteration: number, decimate = 200): Promise<CloudsPayload> {
    return this.request(`/api/clouds/${iteration}?decimate=${decimate}`);
  }

  postIteration(mitigation: Mitigation | null, note = ""): Promise<IterationResponse> {
    return this.request("/api/iterations", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ mitigation, note }),
    });
  }

  postRegion(label: string, voxelKeys: VoxelKeyTuple[]): Promise<RegionResponse> {
    return this.request("/api/regions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ label, voxel_keys: voxelKeys }),
    });
  }

  getRegions(): Promise<RegionsPayload> {
    return this.request("/api/regions");
  }
}
