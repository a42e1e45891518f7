import type { VoxelKeyTuple } from "./types.js";

export type CameraMode = "top_down" | "perspective";

/** What the analyst is looking at; never contains field data itself. */
export interface ViewState {
  cameraMode: CameraMode;
  vectorScale: number;
  visibleIteration: number;
  showRemovedPoints: boolean;
  selectedVoxels: Set<string>;
}

export function voxelId(azimuthIndex: number, elevationIndex: number): string {
  return `${azimuthIndex},${elevationIndex}`;
}

export function parseVoxelId(id: string): VoxelKeyTuple {
  const [az, el] = id.split(",");
  return [Number(az), Number(el)];
}

export function initialViewState(iterationCount: number): ViewState {
  if (!Number.isInteger(iterationCount) || iterationCount < 1) {
    throw new RangeError(`iteration count must be a positive integer, got ${iterationCount}`);
  }
  return {
    cameraMode: "top_down",
    vectorScale: 1,
    visibleIteration: iterationCount - 1,
    showRemovedPoints: true,
    selectedVoxels: new Set(),
  };
}

/** Scale is a pure display multiplier; keep it finite and at least 1. */
export function setVectorScale(state: ViewState, value: number): void {
  if (!Number.isFinite(value)) {
    throw new RangeError(`vector scale must be finite, got ${value}`);
  }
  state.vectorScale = Math.max(1, value);
}

export function setVisibleIteration(
  state: ViewState,
  index: number,
  iterationCount: number,
): void {
  if (!Number.isInteger(index) || index < 0 || index >= iterationCount) {
    throw new RangeError(`iteration ${index} out of range [0, ${iterationCount})`);
  }
  state.visibleIteration = index;
}

// the toggle leaves selection and iteration alone by construction
export function toggleCamera(state: ViewState): CameraMode {
  state.cameraMode = state.cameraMode === "top_down" ? "perspective" : "top_down";
  return state.cameraMode;
}

export function toggleVoxel(state: ViewState, azimuthIndex: number, elevationIndex: number): boolean {
  const id = voxelId(azimuthIndex, elevationIndex);
  if (state.selectedVoxels.has(id)) {
    state.selectedVoxels.delete(id);
    return false;
  }
  state.selectedVoxels.add(id);
  return true;
}

export function clearSelection(state: ViewState): void {
  state.selectedVoxels.clear();
}

export function selectedKeys(state: ViewState): VoxelKeyTuple[] {
  return [...state.selectedVoxels]
    .map(parseVoxelId)
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
}
