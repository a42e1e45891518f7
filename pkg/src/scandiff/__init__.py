"""Workbench for diagnosing lidar scan-matching adversities.

Builds per-voxel discrepancy-vector fields between registered point-cloud
pairs, simulates synthetic scenes to study known adversity mechanisms, and
tracks an analyst's mitigation loop as a persistent session.
"""

__version__ = "0.1.0"

from .geometry import PointCloud, RigidTransform
from .scene import Scene, SensorModel, build_default_scene, default_sensor_sim
from .raycast import ray_intersect, raycast_cloud
from .field import DiscrepancyField, SphericalGridSpec, compute_field, field_stats
from .mitigate import Mitigation, apply_pipeline, fov_filter, remove_ego, shadow_filter
from .registration import RegistrationResult, icp_register, register_with_truth
from .session import Session, build_session, load_session, run_iteration, save_session

__all__ = [
    "PointCloud",
    "RigidTransform",
    "Scene",
    "SensorModel",
    "build_default_scene",
    "default_sensor_sim",
    "ray_intersect",
    "raycast_cloud",
    "DiscrepancyField",
    "SphericalGridSpec",
    "compute_field",
    "field_stats",
    "Mitigation",
    "apply_pipeline",
    "fov_filter",
    "remove_ego",
    "shadow_filter",
    "RegistrationResult",
    "icp_register",
    "register_with_truth",
    "Session",
    "build_session",
    "load_session",
    "run_iteration",
    "save_session",
]
