// Browser glue: binds the workbench controller to the page. Everything
// testable lives in the other modules; this file only draws and wires.

import { ApiClient } from "./api.js";
import { Workbench } from "./controller.js";
import {
  frustumWireframe,
  projectPerspective,
  projectTopDown,
  type PerspectiveCamera,
  type Vec3Projector,
  type Viewport,
} from "./glyphs.js";
import { regionOutlineColor } from "./regions.js";
import type { Mitigation, Vec3 } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d")!;
const banner = $<HTMLDivElement>("banner");
const iterationSelect = $<HTMLSelectElement>("iteration");
const scaleSlider = $<HTMLInputElement>("scale");
const scaleValue = $<HTMLSpanElement>("scale-value");
const cameraButton = $<HTMLButtonElement>("camera");
const removedToggle = $<HTMLInputElement>("show-removed");
const kindSelect = $<HTMLSelectElement>("mitigation-kind");
const paramsInput = $<HTMLInputElement>("mitigation-params");
const noteInput = $<HTMLInputElement>("mitigation-note");
const applyButton = $<HTMLButtonElement>("apply");
const regionLabel = $<HTMLInputElement>("region-label");
const markButton = $<HTMLButtonElement>("mark");
const thresholdInput = $<HTMLInputElement>("threshold");
const detail = $<HTMLPreElement>("detail");
const historyList = $<HTMLTableSectionElement>("history-rows");
const regionList = $<HTMLUListElement>("region-list");

const apiBase = new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000";
const bench = new Workbench(new ApiClient(apiBase));

const camera: PerspectiveCamera = {
  position: [-28, -20, 14] as Vec3,
  yaw: Math.atan2(20, 28),
  pitch: -0.32,
  focal: 900,
};

function viewport(): Viewport {
  return { width: canvas.width, height: canvas.height, span: 64 };
}

function projector(): Vec3Projector {
  if (bench.state.cameraMode === "top_down") {
    return (p) => projectTopDown(p, viewport());
  }
  return (p) => projectPerspective(p, camera, viewport());
}

function showError(message: string | null): void {
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

function magnitudeColor(mag: number, maxMag: number): string {
  const t = maxMag > 0 ? Math.min(1, mag / maxMag) : 0;
  const hue = 220 - 220 * t; // blue at rest, red when hot
  return `hsl(${hue}, 85%, 50%)`;
}

const REMOVED_COLORS = ["#e05c2a", "#c92ae0", "#2ae0b8", "#e0c22a"];

function drawSegments(project: Vec3Projector, segments: [Vec3, Vec3][], style: string, dashed: boolean): void {
  ctx.strokeStyle = style;
  ctx.lineWidth = 1;
  ctx.setLineDash(dashed ? [5, 4] : []);
  ctx.beginPath();
  for (const [a, b] of segments) {
    const pa = project(a);
    const pb = project(b);
    if (!pa || !pb) continue;
    ctx.moveTo(pa[0], pa[1]);
    ctx.lineTo(pb[0], pb[1]);
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

async function draw(): Promise<void> {
  const project = projector();
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  // point clouds: survivors gray, removed points colored by the step that cut them
  const cloudsPayload = await bench.ensureClouds(bench.state.visibleIteration);
  for (const slot of ["cloud1", "cloud2"] as const) {
    const sample = cloudsPayload[slot];
    sample.points.forEach((p, i) => {
      const removedBy = sample.removed_by[i];
      if (removedBy >= 0 && !bench.state.showRemovedPoints) return;
      const q = project(p);
      if (!q) return;
      ctx.fillStyle = removedBy >= 0 ? REMOVED_COLORS[removedBy % REMOVED_COLORS.length] : "#9a9a9a";
      ctx.fillRect(q[0] - 1, q[1] - 1, 2, 2);
    });
  }

  // discrepancy arrows
  const field = bench.visibleField();
  const maxMag = field.stats.max_magnitude;
  for (const arrow of bench.renderField()) {
    const tail = project(arrow.tail);
    const tip = project(arrow.tip);
    if (!tail || !tip) continue;
    ctx.strokeStyle = magnitudeColor(arrow.magnitude, maxMag);
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(tail[0], tail[1]);
    ctx.lineTo(tip[0], tip[1]);
    ctx.stroke();
    const dx = tip[0] - tail[0];
    const dy = tip[1] - tail[1];
    const len = Math.hypot(dx, dy);
    if (len > 2) {
      const ux = dx / len;
      const uy = dy / len;
      ctx.beginPath();
      ctx.moveTo(tip[0], tip[1]);
      ctx.lineTo(tip[0] - 5 * ux + 3 * uy, tip[1] - 5 * uy - 3 * ux);
      ctx.moveTo(tip[0], tip[1]);
      ctx.lineTo(tip[0] - 5 * ux - 3 * uy, tip[1] - 5 * uy + 3 * ux);
      ctx.stroke();
    } else {
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillRect(tail[0] - 1, tail[1] - 1, 3, 3);
    }
  }

  // selected voxels as solid wireframes, regions as dashed outlines
  for (const id of bench.state.selectedVoxels) {
    const [az, el] = id.split(",").map(Number);
    drawSegments(project, frustumWireframe(az, el, field.grid), "#333", false);
  }
  const threshold = Number(thresholdInput.value) || 0.1;
  for (const region of bench.regions) {
    const color = regionOutlineColor(region, field, threshold);
    for (const [az, el] of region.voxel_keys) {
      drawSegments(project, frustumWireframe(az, el, field.grid), color, true);
    }
  }
}

function renderHistory(): void {
  historyList.replaceChildren(
    ...bench.history.map((entry) => {
      const row = document.createElement("tr");
      const what = entry.mitigationKind ?? (entry.iteration === 0 ? "baseline" : "rerun");
      row.innerHTML = `<td>${entry.iteration}</td><td>${what}</td><td>${entry.maxMagnitude.toFixed(4)}</td>`;
      return row;
    }),
  );
}

function renderRegions(): void {
  regionList.replaceChildren(
    ...bench.regions.map((region) => {
      const li = document.createElement("li");
      li.textContent = `${region.label} (${region.voxel_keys.length} voxels)`;
      return li;
    }),
  );
}

function renderIterations(): void {
  iterationSelect.replaceChildren(
    ...bench.history.map((entry) => {
      const opt = document.createElement("option");
      opt.value = String(entry.iteration);
      opt.textContent = `iteration ${entry.iteration}`;
      return opt;
    }),
  );
  iterationSelect.value = String(bench.state.visibleIteration);
}

function renderDetail(): void {
  const lines: string[] = [];
  for (const id of bench.state.selectedVoxels) {
    const [az, el] = id.split(",").map(Number);
    const rec = bench.voxelRecord(az, el);
    if (!rec) {
      lines.push(`(${az}, ${el}): not populated at this iteration`);
      continue;
    }
    // payload numbers verbatim; the UI never reformats server values here
    lines.push(`(${az}, ${el}) vector [${rec.vector.join(", ")}] points ${rec.count1}/${rec.count2}`);
  }
  detail.textContent = lines.join("\n") || "click arrows to inspect voxels";
}

async function refresh(): Promise<void> {
  renderIterations();
  renderHistory();
  renderRegions();
  renderDetail();
  showError(bench.lastError);
  await draw();
}

function parseParams(text: string): Record<string, number> {
  const params: Record<string, number> = {};
  for (const part of text.split(",").map((s) => s.trim()).filter(Boolean)) {
    const [key, value] = part.split("=");
    params[key.trim()] = Number(value);
  }
  return params;
}

canvas.addEventListener("click", async (ev) => {
  const rect = canvas.getBoundingClientRect();
  const x = ev.clientX - rect.left;
  const y = ev.clientY - rect.top;
  const project = projector();
  let best: { az: number; el: number; d: number } | null = null;
  for (const arrow of bench.renderField()) {
    const q = project(arrow.tail);
    if (!q) continue;
    const d = Math.hypot(q[0] - x, q[1] - y);
    if (d < 12 && (!best || d < best.d)) {
      best = { az: arrow.azimuthIndex, el: arrow.elevationIndex, d };
    }
  }
  if (best) {
    bench.select(best.az, best.el);
    await refresh();
  }
});

scaleSlider.addEventListener("input", async () => {
  bench.setScale(Number(scaleSlider.value));
  scaleValue.textContent = `${bench.state.vectorScale}x`;
  await draw();
});

cameraButton.addEventListener("click", async () => {
  const mode = bench.flipCamera();
  cameraButton.textContent = mode === "top_down" ? "top-down" : "perspective";
  await draw();
});

removedToggle.addEventListener("change", async () => {
  bench.state.showRemovedPoints = removedToggle.checked;
  await draw();
});

iterationSelect.addEventListener("change", async () => {
  try {
    await bench.setIteration(Number(iterationSelect.value));
    await refresh();
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err));
  }
});

applyButton.addEventListener("click", async () => {
  const kind = kindSelect.value;
  const mitigation: Mitigation | null =
    kind === "rerun" ? null : { kind, parameters: parseParams(paramsInput.value) };
  applyButton.disabled = true;
  try {
    await bench.applyMitigation(mitigation, noteInput.value);
    noteInput.value = "";
    await refresh();
  } catch {
    showError(bench.lastError);
  } finally {
    applyButton.disabled = false;
  }
});

markButton.addEventListener("click", async () => {
  try {
    await bench.markContour(regionLabel.value);
    regionLabel.value = "";
    await refresh();
  } catch {
    showError(bench.lastError);
  }
});

thresholdInput.addEventListener("change", draw);

(async () => {
  try {
    await bench.init();
    scaleSlider.value = String(bench.state.vectorScale);
    await refresh();
  } catch (err) {
    showError(`cannot reach the session server at ${apiBase}: ${err instanceof Error ? err.message : err}`);
  }
})();
