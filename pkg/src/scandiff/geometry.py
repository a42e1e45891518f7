"""Rigid transforms, point clouds, and Cartesian/spherical conversions.

Conventions used throughout the package:

* Points are float64 arrays: a single point is shape ``(3,)``, a batch is
  ``(N, 3)``. Units are meters.
* Rotations are stored as roll/pitch/yaw angles in radians. The rotation
  matrix is ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``, i.e. yaw is applied
  first, then pitch about the new y axis, then roll about the new x axis
  (intrinsic z-y'-x''). Only a consistent convention matters for the
  supported workflows; this one is documented here and tested.
* Azimuth is the angle of the horizontal projection measured from +x
  toward +y, normalized to [0, 2*pi). Elevation is arcsin(dz / range),
  in [-pi/2, pi/2]. At the poles (zero horizontal component) azimuth is
  defined as 0 so that binning stays deterministic.
* Angles are radians everywhere inside the library; degrees appear only
  at configuration boundaries (CLI flags, sensor presets).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi


class SphericalCoord(NamedTuple):
    range_m: float
    azimuth: float
    elevation: float


def as_point(p) -> np.ndarray:
    """Coerce to a finite (3,) float64 point, raising ValueError otherwise."""
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite components: {arr}")
    return arr


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """3x3 rotation for the package convention R = Rz(yaw) Ry(pitch) Rx(roll)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def euler_from_matrix(rot: np.ndarray) -> tuple[float, float, float]:
    """Recover (roll, pitch, yaw) from a rotation matrix under this convention.

    Near the pitch singularity (|pitch| = pi/2) roll is set to 0 and the
    remaining freedom is absorbed into yaw.
    """
    s = -rot[2, 0]
    s = min(1.0, max(-1.0, float(s)))
    pitch = float(np.arcsin(s))
    if abs(s) < 1.0 - 1e-12:
        roll = float(np.arctan2(rot[2, 1], rot[2, 2]))
        yaw = float(np.arctan2(rot[1, 0], rot[0, 0]))
    else:
        roll = 0.0
        yaw = float(np.arctan2(-rot[0, 1], rot[1, 1]))
    return roll, pitch, yaw


@dataclass(frozen=True)
class RigidTransform:
    """Rigid body transform: rotate by (roll, pitch, yaw), then translate."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "translation", as_point(self.translation))
        for name in ("roll", "pitch", "yaw"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, rot: np.ndarray, translation) -> "RigidTransform":
        roll, pitch, yaw = euler_from_matrix(np.asarray(rot, dtype=float))
        return cls(translation=as_point(translation), roll=roll, pitch=pitch, yaw=yaw)

    @property
    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.roll, self.pitch, self.yaw)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) batch or a single (3,) point: R p + t."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.matrix @ pts + self.translation
        return pts @ self.matrix.T + self.translation

    def inverse(self) -> "RigidTransform":
        rot_inv = self.matrix.T
        return RigidTransform.from_matrix(rot_inv, -(rot_inv @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return the transform equivalent to applying ``other`` first, then self."""
        rot = self.matrix @ other.matrix
        t = self.matrix @ other.translation + self.translation
        return RigidTransform.from_matrix(rot, t)

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-12) -> bool:
        return bool(
            np.all(np.abs(self.translation - other.translation) <= tol)
            and np.max(np.abs(self.matrix - other.matrix)) <= tol
        )

    def as_pose_tuple(self) -> tuple[float, float, float, float, float, float]:
        tx, ty, tz = self.translation
        return (float(tx), float(ty), float(tz), self.roll, self.pitch, self.yaw)


def transform_point(p, transform: RigidTransform) -> np.ndarray:
    """R p + t for a single point."""
    return transform.apply(as_point(p))


def transform_points(points: np.ndarray, transform: RigidTransform) -> np.ndarray:
    """R p + t applied row-wise to an (N, 3) array."""
    return transform.apply(points)


def invert_transform(transform: RigidTransform) -> RigidTransform:
    return transform.inverse()


def compose(first: RigidTransform, second: RigidTransform) -> RigidTransform:
    """compose(a, b): apply b first, then a (matrix product a @ b)."""
    return first.compose(second)


def normalize_azimuth(az):
    """Wrap angle(s) into [0, 2*pi); values rounding up to 2*pi map to 0."""
    wrapped = np.mod(az, TWO_PI)
    if np.ndim(wrapped) == 0:
        return 0.0 if wrapped >= TWO_PI else float(wrapped)
    wrapped = np.asarray(wrapped)
    wrapped[wrapped >= TWO_PI] = 0.0
    return wrapped


def cart_to_spherical(p, origin=(0.0, 0.0, 0.0)) -> SphericalCoord:
    """Convert one point to (range, azimuth, elevation) about ``origin``.

    Raises ValueError for the degenerate p == origin case; the caller decides
    what to do with such points.
    """
    d = as_point(p) - as_point(origin)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ValueError("point coincides with the spherical origin")
    horiz = float(np.hypot(d[0], d[1]))
    az = 0.0 if horiz == 0.0 else normalize_azimuth(np.arctan2(d[1], d[0]))
    el = float(np.arcsin(np.clip(d[2] / r, -1.0, 1.0)))
    return SphericalCoord(r, float(az), el)


def cart_to_spherical_arrays(points: np.ndarray, origin=(0.0, 0.0, 0.0)):
    """Vectorized conversion of (N, 3) points to (range, azimuth, elevation).

    Rows at zero range get azimuth 0 and elevation 0; callers that bin points
    must mask them out (range == 0).
    """
    d = np.asarray(points, dtype=float) - as_point(origin)
    r = np.sqrt(np.einsum("ij,ij->i", d, d))
    with np.errstate(invalid="ignore", divide="ignore"):
        el = np.arcsin(np.clip(np.divide(d[:, 2], r, where=r > 0), -1.0, 1.0))
    az = normalize_azimuth(np.arctan2(d[:, 1], d[:, 0]))
    zero = r == 0
    if np.any(zero):
        az = np.where(zero, 0.0, az)
        el = np.where(zero, 0.0, el)
    return r, az, el


def spherical_to_cart(coord: SphericalCoord, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    r, az, el = coord
    o = as_point(origin)
    ce = np.cos(el)
    return o + r * np.array([ce * np.cos(az), ce * np.sin(az), np.sin(el)])


@dataclass
class PointCloud:
    """An ordered set of lidar returns plus the pose of the sensor that made them.

    ``points`` are expressed in the cloud's own working frame (for a freshly
    simulated or loaded cloud that is the sensor frame, origin at the lidar).
    ``sensor_pose`` places that frame in whatever outer frame the caller works
    in; after registration it holds the transform into the reference cloud's
    frame, so ``sensor_pose.translation`` is the sensor position there.
    """

    points: np.ndarray
    sensor_pose: RigidTransform = field(default_factory=RigidTransform.identity)
    label: str = ""
    source_path: str | None = None
    source_sha256: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        self.points = pts

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def sensor_origin(self) -> np.ndarray:
        return self.sensor_pose.translation

    def take(self, index) -> "PointCloud":
        """New cloud keeping ``points[index]`` (order preserved), same pose."""
        return PointCloud(
            points=self.points[index],
            sensor_pose=self.sensor_pose,
            label=self.label,
            source_path=self.source_path,
            source_sha256=self.source_sha256,
        )
