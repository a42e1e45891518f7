import type { FieldPayload, RegionPayload } from "./types.js";
import { voxelId } from "./state.js";

export type OutlineColor = "red" | "green";

/**
 * A marked contour stays red while any member voxel still carries a
 * discrepancy at or above the analyst's threshold, and turns green once
 * every member has dropped below it. Members absent from the field have
 * no populated points and count as zero.
 */
export function regionOutlineColor(
  region: RegionPayload,
  field: FieldPayload,
  threshold: number,
): OutlineColor {
  if (!Number.isFinite(threshold) || threshold <= 0) {
    throw new RangeError(`threshold must be positive and finite, got ${threshold}`);
  }
  const magnitudes = new Map<string, number>();
  for (const v of field.voxels) {
    magnitudes.set(
      voxelId(v.azimuth_index, v.elevation_index),
      Math.hypot(v.vector[0], v.vector[1], v.vector[2]),
    );
  }
  for (const [az, el] of region.voxel_keys) {
    const mag = magnitudes.get(voxelId(az, el)) ?? 0;
    if (mag >= threshold) {
      return "red";
    }
  }
  return "green";
}
