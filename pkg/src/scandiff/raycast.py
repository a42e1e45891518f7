"""Ray casting of lidar sensor models against synthetic scenes.

All kernels are vectorized over rays: a primitive kernel takes one origin and
an (N, 3) block of unit directions and returns an (N,) array of hit ranges,
with ``np.inf`` marking misses. Boxes use the axis-aligned slab test, the
cylinder a quadratic on its infinite surface clipped to [0, height] plus the
two end caps, the ground plane a z = 0 intersection clipped to its extent.

Cloud points come out in the sensor frame (point = range * ray direction),
ordered channel-major: all azimuth steps of channel 0, then channel 1, and so
on. With noise_sigma = 0 the output is bit-reproducible.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .geometry import PointCloud, RigidTransform, as_point
from .scene import Box, Cylinder, GroundPlane, Scene, SensorModel

# hits closer than this are treated as the ray grazing its own origin
EPS = 1e-9


def _ground_ranges(prim: GroundPlane, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    t = np.full(len(dirs), np.inf)
    dz = dirs[:, 2]
    moving = dz != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hit = np.where(moving, -origin[2] / dz, np.inf)
    x = origin[0] + t_hit * dirs[:, 0]
    y = origin[1] + t_hit * dirs[:, 1]
    ok = (
        (t_hit > EPS)
        & np.isfinite(t_hit)
        & (np.abs(x) <= prim.extent_x / 2.0)
        & (np.abs(y) <= prim.extent_y / 2.0)
    )
    t[ok] = t_hit[ok]
    return t


def _box_ranges(prim: Box, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    lo = np.array([prim.center_x - prim.size_x / 2.0, prim.center_y - prim.size_y / 2.0, 0.0])
    hi = np.array([prim.center_x + prim.size_x / 2.0, prim.center_y + prim.size_y / 2.0, prim.height])
    # zero components nudged so the slab division yields the right signed inf
    safe = np.where(dirs == 0.0, 1e-300, dirs)
    t1 = (lo - origin) / safe
    t2 = (hi - origin) / safe
    tmin = np.minimum(t1, t2).max(axis=1)
    tmax = np.maximum(t1, t2).min(axis=1)
    t = np.where(tmin > EPS, tmin, tmax)
    hit = (tmax >= tmin) & (t > EPS)
    return np.where(hit, t, np.inf)


def _cylinder_ranges(prim: Cylinder, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    radius = prim.diameter / 2.0
    ocx = origin[0] - prim.center_x
    ocy = origin[1] - prim.center_y
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]

    t = np.full(len(dirs), np.inf)

    # lateral surface: quadratic in the horizontal projection
    a = dx * dx + dy * dy
    b = 2.0 * (ocx * dx + ocy * dy)
    c = ocx * ocx + ocy * ocy - radius * radius
    disc = b * b - 4.0 * a * c
    solvable = (a > 0.0) & (disc >= 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.sqrt(np.where(solvable, disc, 0.0))
        t_near = np.where(solvable, (-b - root) / (2.0 * a), np.inf)
        t_far = np.where(solvable, (-b + root) / (2.0 * a), np.inf)
    for cand in (t_near, t_far):
        z = origin[2] + cand * dz
        ok = solvable & (cand > EPS) & np.isfinite(cand) & (z >= 0.0) & (z <= prim.height)
        t = np.minimum(t, np.where(ok, cand, np.inf))

    # end caps at z = 0 and z = height
    moving = dz != 0.0
    for z_cap in (0.0, prim.height):
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = np.where(moving, (z_cap - origin[2]) / dz, np.inf)
        x = origin[0] + cand * dx - prim.center_x
        y = origin[1] + cand * dy - prim.center_y
        ok = (cand > EPS) & np.isfinite(cand) & (x * x + y * y <= radius * radius)
        t = np.minimum(t, np.where(ok, cand, np.inf))

    return t


def primitive_ranges(prim, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Hit range per ray against a single primitive, np.inf where it misses."""
    if isinstance(prim, GroundPlane):
        return _ground_ranges(prim, origin, dirs)
    if isinstance(prim, Box):
        return _box_ranges(prim, origin, dirs)
    if isinstance(prim, Cylinder):
        return _cylinder_ranges(prim, origin, dirs)
    raise TypeError(f"unknown primitive type: {type(prim).__name__}")


def scene_ranges(scene: Scene, origin, dirs: np.ndarray) -> np.ndarray:
    """Nearest hit range per ray over all primitives (np.inf = sky)."""
    origin = as_point(origin)
    dirs = np.asarray(dirs, dtype=np.float64)
    t = np.full(len(dirs), np.inf)
    for prim in scene.primitives:
        t = np.minimum(t, primitive_ranges(prim, origin, dirs))
    return t


def ray_intersect(scene: Scene, origin, direction) -> Optional[Tuple[np.ndarray, float]]:
    """Nearest scene intersection along one ray, or None.

    direction must be unit length (within 1e-9).
    """
    origin = as_point(origin)
    direction = as_point(direction)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    t = scene_ranges(scene, origin, direction[None, :])[0]
    if not np.isfinite(t):
        return None
    return origin + t * direction, float(t)


def ray_directions(sensor: SensorModel) -> np.ndarray:
    """Unit ray directions in the sensor frame, channel-major then azimuth."""
    els = np.repeat(sensor.channel_elevations(), sensor.azimuth_steps)
    azs = np.tile(sensor.azimuth_angles(), sensor.elevation_channels)
    cos_el = np.cos(els)
    return np.column_stack((cos_el * np.cos(azs), cos_el * np.sin(azs), np.sin(els)))


def raycast_cloud(
    scene: Scene,
    pose: RigidTransform,
    sensor: SensorModel,
    label: str = "",
    seed=None,
) -> PointCloud:
    """Simulate one scan: one ray per (channel, azimuth step) from the pose.

    Hits within max_range become sensor-frame points (range times ray
    direction); the capture pose is recorded on the cloud. Gaussian range
    noise is added along each ray when the sensor requests it, drawn from a
    generator seeded with `seed`.
    """
    dirs_sensor = ray_directions(sensor)
    dirs_world = dirs_sensor @ pose.matrix.T
    t = scene_ranges(scene, pose.translation, dirs_world)
    hit = np.isfinite(t) & (t <= sensor.max_range)
    ranges = t[hit]
    if sensor.noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        ranges = ranges + rng.normal(0.0, sensor.noise_sigma, size=len(ranges))
    points = ranges[:, None] * dirs_sensor[hit]
    return PointCloud(points=points, sensor_pose=pose, label=label)
