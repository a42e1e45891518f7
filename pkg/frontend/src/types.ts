// Payload shapes of the workbench HTTP API, field names as served.

export type Vec3 = [number, number, number];
export type VoxelKeyTuple = [number, number];

export interface GridSpec {
  azimuth_bins: number;
  elevation_bins: number;
  elevation_min: number;
  elevation_max: number;
  origin: Vec3;
}

export interface VoxelRecord {
  azimuth_index: number;
  elevation_index: number;
  centroid1: Vec3;
  centroid2: Vec3;
  vector: Vec3;
  count1: number;
  count2: number;
}

export interface FieldStats {
  max_magnitude: number;
  mean_magnitude: number;
  median_magnitude: number;
  populated_voxels: number;
}

export interface FieldPayload {
  grid: GridSpec;
  voxels: VoxelRecord[];
  stats: FieldStats;
}

export interface Mitigation {
  kind: string;
  parameters: Record<string, number>;
}

export interface MitigationReport {
  kind: string;
  removed_from_cloud1: number;
  removed_from_cloud2: number;
  removed_indices1: number[];
  removed_indices2: number[];
}

export interface IterationRecord {
  mitigations: Mitigation[];
  field: FieldPayload;
  reports: MitigationReport[];
  note: string;
}

export interface IterationResponse {
  iteration: number;
  record: IterationRecord;
}

export interface RegistrationInfo {
  transform: {
    translation: Vec3;
    roll: number;
    pitch: number;
    yaw: number;
  };
  method: string;
  iterations: number;
  final_residual: number;
  converged: boolean;
  residual_trace: number[];
}

export interface SessionSummary {
  iteration_count: number;
  grid: GridSpec;
  registration: RegistrationInfo;
  origin1: Vec3;
  origin2: Vec3;
  cloud1_points: number;
  cloud2_points: number;
  stats_history: FieldStats[];
  mitigations: Mitigation[];
  region_count: number;
}

export interface CloudSample {
  points: Vec3[];
  removed_by: number[];
}

export interface CloudsPayload {
  iteration: number;
  decimate: number;
  mitigations: Mitigation[];
  cloud1: CloudSample;
  cloud2: CloudSample;
}

export interface RegionStats {
  label: string;
  iteration: number;
  populated: number;
  max_magnitude: number;
  mean_magnitude: number;
}

export interface RegionPayload {
  label: string;
  voxel_keys: VoxelKeyTuple[];
  created_at_iteration: number;
}

export interface RegionResponse extends RegionPayload {
  region: number;
}

export interface RegionWithHistory extends RegionPayload {
  history: RegionStats[];
}

export interface RegionsPayload {
  regions: RegionWithHistory[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
