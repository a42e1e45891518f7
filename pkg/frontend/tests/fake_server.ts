// In-memory stand-in for the session server, built on payloads recorded
// from the real thing (tests/fixtures). Reads serve the recorded JSON;
// mutations follow the same visible rules: one new iteration per accepted
// POST, 422 on bad input, regions accumulate and report per-iteration
// stats. A fidelity test pins its region math to the recorded responses.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";
import type {
  FieldPayload,
  IterationResponse,
  Mitigation,
  RegionPayload,
  RegionStats,
  SessionSummary,
  VoxelKeyTuple,
} from "../src/types.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf8")) as T;
}

const KNOWN_KINDS = new Set(["ego_removal", "fov_filter", "shadow_filter"]);

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export class FakeServer {
  fields: FieldPayload[] = [fixture("field_0.json")];
  regions: RegionPayload[] = [];
  postCount = 0;

  private summary = fixture<SessionSummary>("session_fresh.json");
  private canned: IterationResponse[] = [
    fixture("post_fov.json"),
    fixture("post_shadow.json"),
  ];
  private clouds = new Map<number, unknown>([
    [0, fixture("clouds_0.json")],
    [1, fixture("clouds_1.json")],
  ]);
  private lastMitigations: Mitigation[] = [];

  readonly fetch: FetchLike = async (url, init) => this.handle(url, init);

  private handle(url: string, init?: RequestInit): Response {
    const u = new URL(url);
    const method = init?.method ?? "GET";
    const path = u.pathname;

    if (path === "/api/session" && method === "GET") {
      return jsonResponse(this.summaryNow());
    }

    const field = path.match(/^\/api\/field\/(\d+)$/);
    if (field && method === "GET") {
      const idx = Number(field[1]);
      if (idx >= this.fields.length) {
        return jsonResponse({ code: "not_found", message: `iteration ${idx} does not exist` }, 404);
      }
      return jsonResponse(this.fields[idx]);
    }

    const clouds = path.match(/^\/api\/clouds\/(\d+)$/);
    if (clouds && method === "GET") {
      const idx = Number(clouds[1]);
      const decimate = Number(u.searchParams.get("decimate") ?? "1");
      if (decimate < 1) {
        return jsonResponse({ code: "bad_request", message: "decimate must be >= 1" }, 422);
      }
      if (idx >= this.fields.length) {
        return jsonResponse({ code: "not_found", message: `iteration ${idx} does not exist` }, 404);
      }
      const payload = this.clouds.get(idx);
      if (!payload) {
        throw new Error(`no recorded cloud payload for iteration ${idx}`);
      }
      return jsonResponse(payload);
    }

    if (path === "/api/iterations" && method === "POST") {
      return this.postIteration(JSON.parse(String(init?.body)));
    }

    if (path === "/api/regions" && method === "POST") {
      return this.postRegion(JSON.parse(String(init?.body)));
    }

    if (path === "/api/regions" && method === "GET") {
      return jsonResponse({
        regions: this.regions.map((r) => ({ ...r, history: this.regionHistory(r) })),
      });
    }

    return jsonResponse({ code: "not_found", message: `no route ${method} ${path}` }, 404);
  }

  private summaryNow(): SessionSummary {
    return {
      ...this.summary,
      iteration_count: this.fields.length,
      stats_history: this.fields.map((f) => f.stats),
      mitigations: this.lastMitigations,
      region_count: this.regions.length,
    };
  }

  private postIteration(body: { mitigation?: Mitigation | null; note?: string }): Response {
    const mitigation = body.mitigation ?? null;
    if (mitigation !== null && !KNOWN_KINDS.has(mitigation.kind)) {
      return jsonResponse(
        { code: "bad_mitigation", message: `unknown mitigation kind: '${mitigation.kind}'` },
        422,
      );
    }

    // replay the recorded response when the next expected filter arrives;
    // anything else (a rerun, an out-of-script filter) repeats the last field
    const next = this.canned[0];
    const nextKind = next?.record.mitigations[next.record.mitigations.length - 1]?.kind;
    let resp: IterationResponse;
    if (mitigation !== null && next && nextKind === mitigation.kind) {
      this.canned.shift();
      resp = next;
    } else {
      const last = this.fields[this.fields.length - 1];
      resp = {
        iteration: this.fields.length,
        record: {
          mitigations: mitigation ? [...this.lastMitigations, mitigation] : [...this.lastMitigations],
          field: JSON.parse(JSON.stringify(last)) as FieldPayload,
          reports: [],
          note: "",
        },
      };
    }
    resp.iteration = this.fields.length;
    resp.record.note = body.note ?? "";
    this.fields.push(resp.record.field);
    this.lastMitigations = resp.record.mitigations;
    this.postCount += 1;
    return jsonResponse(resp, 201);
  }

  private postRegion(body: { label?: string; voxel_keys?: VoxelKeyTuple[] }): Response {
    const label = body.label ?? "";
    const keys = body.voxel_keys;
    if (!label) {
      return jsonResponse({ code: "bad_region", message: "label is required" }, 422);
    }
    if (!Array.isArray(keys) || keys.length === 0) {
      return jsonResponse({ code: "bad_region", message: "voxel_keys must be a non-empty list" }, 422);
    }
    const grid = this.summary.grid;
    for (const [az, el] of keys) {
      if (az < 0 || az >= grid.azimuth_bins) {
        return jsonResponse({ code: "bad_region", message: `azimuth_index ${az} out of range` }, 422);
      }
      if (el < 0 || el >= grid.elevation_bins) {
        return jsonResponse({ code: "bad_region", message: `elevation_index ${el} out of range` }, 422);
      }
    }
    const region: RegionPayload = {
      label,
      voxel_keys: keys,
      created_at_iteration: this.fields.length - 1,
    };
    this.regions.push(region);
    return jsonResponse({ region: this.regions.length - 1, ...region }, 201);
  }

  private regionHistory(region: RegionPayload): RegionStats[] {
    return this.fields.map((field, iteration) => {
      const wanted = new Set(region.voxel_keys.map(([a, e]) => `${a},${e}`));
      const mags: number[] = [];
      for (const v of field.voxels) {
        if (wanted.has(`${v.azimuth_index},${v.elevation_index}`)) {
          // plain sqrt of the squared sum, matching the server's norm
          mags.push(Math.sqrt(v.vector[0] ** 2 + v.vector[1] ** 2 + v.vector[2] ** 2));
        }
      }
      return {
        label: region.label,
        iteration,
        populated: mags.length,
        max_magnitude: mags.length ? Math.max(...mags) : 0,
        mean_magnitude: mags.length ? mags.reduce((a, b) => a + b, 0) / mags.length : 0,
      };
    });
  }
}

/** Transport that fails every POST with a server error, reads untouched. */
export function failingPosts(base: FetchLike): FetchLike {
  return async (url, init) => {
    if ((init?.method ?? "GET") === "POST") {
      return jsonResponse({ code: "boom", message: "synthetic server failure" }, 500);
    }
    return base(url, init);
  };
}
