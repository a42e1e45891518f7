"""Expressing cloud 2 in cloud 1's frame.

Two paths: exact registration from known capture poses (the simulation
workflow), and point-to-point ICP when truth is unavailable. Either way the
output transform T maps cloud-2-frame coordinates into cloud-1-frame
coordinates, and the registered cloud records T as its sensor_pose, so
T.translation is sensor 2's position in the working frame. Cloud 1 itself
stays in its own sensor frame, whose origin is (0, 0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import List

import numpy as np

from .geometry import PointCloud, RigidTransform
from .neighbors import UniformGridIndex

DEFAULT_MAX_ITER = 60
DEFAULT_TOL = 1e-6
DEFAULT_MAX_CORR_DIST = 1.0


@dataclass
class RegistrationResult:
    transform: RigidTransform
    method: str  # "truth" or "icp"
    iterations: int = 0
    final_residual: float = 0.0
    converged: bool = True
    residual_trace: List[float] = dataclass_field(default_factory=list)

    def __post_init__(self):
        if self.final_residual < 0:
            raise ValueError("residual must be >= 0")

    def to_dict(self) -> dict:
        t = self.transform
        return {
            "transform": {
                "translation": [float(v) for v in t.translation],
                "roll": t.roll,
                "pitch": t.pitch,
                "yaw": t.yaw,
            },
            "method": self.method,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "residual_trace": list(self.residual_trace),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegistrationResult":
        tr = data["transform"]
        return cls(
            transform=RigidTransform(
                translation=np.asarray(tr["translation"], dtype=np.float64),
                roll=float(tr["roll"]),
                pitch=float(tr["pitch"]),
                yaw=float(tr["yaw"]),
            ),
            method=data["method"],
            iterations=int(data.get("iterations", 0)),
            final_residual=float(data.get("final_residual", 0.0)),
            converged=bool(data.get("converged", True)),
            residual_trace=[float(r) for r in data.get("residual_trace", [])],
        )


def apply_registration(cloud2: PointCloud, transform: RigidTransform) -> PointCloud:
    """Map cloud 2 into the cloud-1 frame, recording the transform as pose."""
    return PointCloud(
        points=transform.apply(cloud2.points),
        sensor_pose=transform,
        label=cloud2.label,
        source_path=cloud2.source_path,
        source_sha256=cloud2.source_sha256,
    )


def register_with_truth(cloud2: PointCloud, pose1: RigidTransform, pose2: RigidTransform):
    """Exact registration from the two known capture poses.

    T = pose1^-1 o pose2 takes sensor-2 coordinates to sensor-1 coordinates;
    sensor 2's origin lands at pose1^-1 applied to pose2's translation.
    """
    transform = pose1.inverse().compose(pose2)
    registered = apply_registration(cloud2, transform)
    return registered, RegistrationResult(transform=transform, method="truth")


def _procrustes(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    # closed-form rigid fit src -> dst (Kabsch via 3x3 cross-covariance SVD)
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform.from_matrix(rot, cd - rot @ cs)


def _update_norm(delta: RigidTransform) -> float:
    # translation plus rotation angle; both vanish at identity
    cos_angle = (np.trace(delta.matrix) - 1.0) / 2.0
    angle = float(np.arccos(np.clip(cos_angle, -1.0, 1.0)))
    return float(np.linalg.norm(delta.translation)) + angle


def icp_register(
    cloud1: PointCloud,
    cloud2: PointCloud,
    init: RigidTransform = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    max_corr_dist: float = DEFAULT_MAX_CORR_DIST,
) -> RegistrationResult:
    """Point-to-point ICP: NN correspondence + closed-form rigid alignment.

    Stops when the update norm (translation plus rotation angle) drops
    below tol or max_iter is hit; the latter flags the result as not
    converged. residual_trace records the correspondence RMS at entry to
    each iteration plus the final state, so it has iterations + 1 entries.
    Raises ValueError("registration failed") when no point of cloud 2 finds
    a partner within max_corr_dist.
    """
    if len(cloud1) == 0 or len(cloud2) == 0:
        raise ValueError("registration failed")
    transform = RigidTransform.identity() if init is None else init
    index = UniformGridIndex(cloud1.points, cell_size=max_corr_dist)

    trace: List[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        moved = transform.apply(cloud2.points)
        idx, dist = index.nearest_within(moved, max_corr_dist)
        matched = idx >= 0
        if not matched.any():
            raise ValueError("registration failed")
        trace.append(float(np.sqrt(np.mean(dist[matched] ** 2))))
        delta = _procrustes(moved[matched], cloud1.points[idx[matched]])
        transform = delta.compose(transform)
        if _update_norm(delta) < tol:
            converged = True
            break

    moved = transform.apply(cloud2.points)
    idx, dist = index.nearest_within(moved, max_corr_dist)
    matched = idx >= 0
    final = float(np.sqrt(np.mean(dist[matched] ** 2))) if matched.any() else float("inf")
    trace.append(final)
    return RegistrationResult(
        transform=transform,
        method="icp",
        iterations=iterations,
        final_residual=final,
        converged=converged,
        residual_trace=trace,
    )
