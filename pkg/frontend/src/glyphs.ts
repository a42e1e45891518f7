import type { FieldPayload, GridSpec, Vec3, VoxelRecord } from "./types.js";

/**
 * One arrow per voxel record. The tail sits on the cloud-1 centroid; the
 * tip is offset by the discrepancy vector stretched by the view's scale.
 * Scaling happens here, in glyph space only; the payload numbers are
 * copied, never touched.
 */
export interface ArrowGlyph {
  azimuthIndex: number;
  elevationIndex: number;
  tail: Vec3;
  tip: Vec3;
  magnitude: number;
}

function isVec3(v: unknown): v is Vec3 {
  return Array.isArray(v) && v.length === 3 && v.every((x) => typeof x === "number" && Number.isFinite(x));
}

function checkRecord(rec: VoxelRecord, index: number): void {
  if (!isVec3(rec.centroid1) || !isVec3(rec.centroid2) || !isVec3(rec.vector)) {
    throw new TypeError(`malformed field payload: voxel ${index} is missing a 3-vector`);
  }
  if (!Number.isInteger(rec.azimuth_index) || !Number.isInteger(rec.elevation_index)) {
    throw new TypeError(`malformed field payload: voxel ${index} has bad indices`);
  }
}

/** Reject bad payloads before any glyph is built, so a render is all or nothing. */
export function validateFieldPayload(field: FieldPayload): void {
  if (!field || typeof field !== "object" || !Array.isArray(field.voxels)) {
    throw new TypeError("malformed field payload: no voxel list");
  }
  if (!field.grid || !Number.isInteger(field.grid.azimuth_bins) || !Number.isInteger(field.grid.elevation_bins)) {
    throw new TypeError("malformed field payload: no grid");
  }
  field.voxels.forEach(checkRecord);
}

export function arrowGlyphs(field: FieldPayload, vectorScale: number): ArrowGlyph[] {
  validateFieldPayload(field);
  if (!Number.isFinite(vectorScale)) {
    throw new RangeError("vector scale must be finite");
  }
  return field.voxels.map((v) => ({
    azimuthIndex: v.azimuth_index,
    elevationIndex: v.elevation_index,
    tail: [v.centroid1[0], v.centroid1[1], v.centroid1[2]],
    tip: [
      v.centroid1[0] + vectorScale * v.vector[0],
      v.centroid1[1] + vectorScale * v.vector[1],
      v.centroid1[2] + vectorScale * v.vector[2],
    ],
    magnitude: Math.hypot(v.vector[0], v.vector[1], v.vector[2]),
  }));
}

export interface Viewport {
  width: number;
  height: number;
  /** world meters spanned by the shorter screen axis */
  span: number;
}

/** Straight-down orthographic map: world x right, world y up the screen. */
export function projectTopDown(p: Vec3, viewport: Viewport): [number, number] {
  const s = Math.min(viewport.width, viewport.height) / viewport.span;
  return [viewport.width / 2 + p[0] * s, viewport.height / 2 - p[1] * s];
}

export interface PerspectiveCamera {
  position: Vec3;
  /** bearing of the optical axis in the ground plane, radians */
  yaw: number;
  /** tilt above the horizon, radians */
  pitch: number;
  /** focal length in pixels */
  focal: number;
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/**
 * Pinhole projection; null for points on or behind the image plane.
 * The camera basis comes from yaw then pitch, so zero angles look down
 * the world x axis with z up.
 */
export function projectPerspective(
  p: Vec3,
  camera: PerspectiveCamera,
  viewport: Viewport,
): [number, number] | null {
  const cy = Math.cos(camera.yaw);
  const sy = Math.sin(camera.yaw);
  const cp = Math.cos(camera.pitch);
  const sp = Math.sin(camera.pitch);
  const forward: Vec3 = [cp * cy, cp * sy, sp];
  const right: Vec3 = [-sy, cy, 0];
  const up: Vec3 = [-sp * cy, -sp * sy, cp];

  const d = sub(p, camera.position);
  const depth = dot(d, forward);
  if (depth <= 1e-9) {
    return null;
  }
  const x = dot(d, right);
  const y = dot(d, up);
  return [
    viewport.width / 2 + (camera.focal * x) / depth,
    viewport.height / 2 - (camera.focal * y) / depth,
  ];
}

export type Segment = [Vec3, Vec3];

/** Either camera mode reduced to one shape; null means off screen. */
export type Vec3Projector = (p: Vec3) => [number, number] | null;

function rayDir(azimuth: number, elevation: number): Vec3 {
  const ce = Math.cos(elevation);
  return [ce * Math.cos(azimuth), ce * Math.sin(azimuth), Math.sin(elevation)];
}

/**
 * Wireframe for one spherical frustum cell: near and far quads joined by
 * the four corner rays. Cells are semi-infinite, so the caller picks the
 * two display ranges.
 */
export function frustumWireframe(
  azimuthIndex: number,
  elevationIndex: number,
  grid: GridSpec,
  nearRange = 2,
  farRange = 30,
): Segment[] {
  if (azimuthIndex < 0 || azimuthIndex >= grid.azimuth_bins) {
    throw new RangeError(`azimuth index ${azimuthIndex} outside grid`);
  }
  if (elevationIndex < 0 || elevationIndex >= grid.elevation_bins) {
    throw new RangeError(`elevation index ${elevationIndex} outside grid`);
  }
  const azWidth = (2 * Math.PI) / grid.azimuth_bins;
  const elHeight = (grid.elevation_max - grid.elevation_min) / grid.elevation_bins;
  const az0 = azimuthIndex * azWidth;
  const el0 = grid.elevation_min + elevationIndex * elHeight;
  const o = grid.origin;

  const corner = (az: number, el: number, r: number): Vec3 => {
    const d = rayDir(az, el);
    return [o[0] + r * d[0], o[1] + r * d[1], o[2] + r * d[2]];
  };

  const segments: Segment[] = [];
  for (const r of [nearRange, farRange]) {
    const a = corner(az0, el0, r);
    const b = corner(az0 + azWidth, el0, r);
    const c = corner(az0 + azWidth, el0 + elHeight, r);
    const d = corner(az0, el0 + elHeight, r);
    segments.push([a, b], [b, c], [c, d], [d, a]);
  }
  for (const [az, el] of [
    [az0, el0],
    [az0 + azWidth, el0],
    [az0 + azWidth, el0 + elHeight],
    [az0, el0 + elHeight],
  ] as const) {
    segments.push([corner(az, el, nearRange), corner(az, el, farRange)]);
  }
  return segments;
}
