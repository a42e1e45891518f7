import { ApiClient } from "./api.js";
import { arrowGlyphs, type ArrowGlyph } from "./glyphs.js";
import {
  initialViewState,
  selectedKeys,
  setVectorScale,
  setVisibleIteration,
  toggleCamera,
  toggleVoxel,
  voxelId,
  type CameraMode,
  type ViewState,
} from "./state.js";
import type {
  CloudsPayload,
  FieldPayload,
  Mitigation,
  RegionResponse,
  RegionWithHistory,
  SessionSummary,
  VoxelRecord,
} from "./types.js";

export interface HistoryEntry {
  iteration: number;
  maxMagnitude: number;
  mitigationKind: string | null;
  note: string;
}

/**
 * The view-side half of the analysis loop. Holds the view state, caches
 * server payloads per iteration, and funnels every mutation through the
 * API, one at a time. All numbers it exposes are the server's own; the
 * only client-side arithmetic is glyph geometry.
 */
export class Workbench {
  state!: ViewState;
  summary!: SessionSummary;
  history: HistoryEntry[] = [];
  regions: RegionWithHistory[] = [];
  lastError: string | null = null;

  private readonly fields = new Map<number, FieldPayload>();
  private readonly clouds = new Map<number, CloudsPayload>();
  private mutationInFlight = false;

  constructor(private readonly api: ApiClient) {}

  /** Load everything a fresh page needs; safe to call again to resync. */
  async init(): Promise<void> {
    this.summary = await this.api.getSession();
    this.state = initialViewState(this.summary.iteration_count);
    this.history = this.summary.stats_history.map((stats, i) => ({
      iteration: i,
      maxMagnitude: stats.max_magnitude,
      mitigationKind: null,
      note: "",
    }));
    this.regions = (await this.api.getRegions()).regions;
    this.fields.clear();
    this.clouds.clear();
    await this.ensureField(this.state.visibleIteration);
  }

  async ensureField(iteration: number): Promise<FieldPayload> {
    const cached = this.fields.get(iteration);
    if (cached) {
      return cached;
    }
    const field = await this.api.getField(iteration);
    this.fields.set(iteration, field);
    return field;
  }

  async ensureClouds(iteration: number, decimate = 200): Promise<CloudsPayload> {
    const cached = this.clouds.get(iteration);
    if (cached && cached.decimate === decimate) {
      return cached;
    }
    const payload = await this.api.getClouds(iteration, decimate);
    this.clouds.set(iteration, payload);
    return payload;
  }

  visibleField(): FieldPayload {
    const field = this.fields.get(this.state.visibleIteration);
    if (!field) {
      throw new Error(`field for iteration ${this.state.visibleIteration} not loaded`);
    }
    return field;
  }

  /** Arrow glyphs for the visible iteration at the current vector scale. */
  renderField(): ArrowGlyph[] {
    return arrowGlyphs(this.visibleField(), this.state.vectorScale);
  }

  voxelRecord(azimuthIndex: number, elevationIndex: number): VoxelRecord | undefined {
    return this.visibleField().voxels.find(
      (v) => v.azimuth_index === azimuthIndex && v.elevation_index === elevationIndex,
    );
  }

  async setIteration(index: number): Promise<void> {
    setVisibleIteration(this.state, index, this.summary.iteration_count);
    await this.ensureField(index);
  }

  setScale(value: number): void {
    setVectorScale(this.state, value);
  }

  flipCamera(): CameraMode {
    return toggleCamera(this.state);
  }

  select(azimuthIndex: number, elevationIndex: number): boolean {
    return toggleVoxel(this.state, azimuthIndex, elevationIndex);
  }

  isSelected(azimuthIndex: number, elevationIndex: number): boolean {
    return this.state.selectedVoxels.has(voxelId(azimuthIndex, elevationIndex));
  }

  /**
   * Run one mitigation iteration (null reruns the current list). Exactly
   * one history entry is appended per successful POST; a rejected request
   * leaves view state, history and caches untouched.
   */
  async applyMitigation(mitigation: Mitigation | null, note = ""): Promise<number> {
    if (this.mutationInFlight) {
      throw new Error("another change is still in flight");
    }
    this.mutationInFlight = true;
    try {
      const resp = await this.api.postIteration(mitigation, note);
      this.fields.set(resp.iteration, resp.record.field);
      this.summary.iteration_count = resp.iteration + 1;
      this.summary.stats_history.push(resp.record.field.stats);
      this.history.push({
        iteration: resp.iteration,
        maxMagnitude: resp.record.field.stats.max_magnitude,
        mitigationKind: mitigation ? mitigation.kind : null,
        note: resp.record.note,
      });
      setVisibleIteration(this.state, resp.iteration, this.summary.iteration_count);
      this.lastError = null;
      return resp.iteration;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.mutationInFlight = false;
    }
  }

  /** Persist the current voxel selection as a named contour region. */
  async markContour(label: string): Promise<RegionResponse> {
    const keys = selectedKeys(this.state);
    if (keys.length === 0) {
      throw new Error("no voxels selected");
    }
    if (!label.trim()) {
      throw new Error("a region needs a label");
    }
    try {
      const resp = await this.api.postRegion(label, keys);
      this.regions = (await this.api.getRegions()).regions;
      this.summary.region_count = this.regions.length;
      this.lastError = null;
      return resp;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    }
  }
}
