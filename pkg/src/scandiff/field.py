"""Discrepancy-vector fields on a spherical frustum grid.

A registered cloud pair is binned into azimuth x elevation wedges about the
cloud-1 sensor origin. Each wedge is semi-infinite in range. Per wedge, the
discrepancy vector {U, V, W} is the cloud-2 centroid minus the cloud-1
centroid, in Cartesian components, with the vector tail at the cloud-1
centroid. Bins are half-open [low, high); azimuth wraps.

Binning accumulates with np.add.at in input order, which reproduces a plain
sequential summation bit for bit, so fields are reproducible across runs and
against naive reference implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import List, NamedTuple, Optional

import numpy as np

from .geometry import PointCloud, as_point, cart_to_spherical_arrays


@dataclass
class SphericalGridSpec:
    """Azimuth x elevation binning about a fixed origin.

    Azimuth bins always tile the full revolution (width = 2 pi / bins);
    elevation bins tile [elevation_min, elevation_max). Angles in radians.
    """

    azimuth_bins: int
    elevation_bins: int
    elevation_min: float
    elevation_max: float
    origin: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.azimuth_bins < 1 or self.elevation_bins < 1:
            raise ValueError("grid needs at least one bin per axis")
        if not self.elevation_min < self.elevation_max:
            raise ValueError("elevation_min must be below elevation_max")
        self.origin = as_point(self.origin)

    @property
    def azimuth_width(self) -> float:
        return 2.0 * math.pi / self.azimuth_bins

    @property
    def elevation_height(self) -> float:
        return (self.elevation_max - self.elevation_min) / self.elevation_bins

    @property
    def voxel_count(self) -> int:
        return self.azimuth_bins * self.elevation_bins

    def with_origin(self, origin) -> "SphericalGridSpec":
        return SphericalGridSpec(
            azimuth_bins=self.azimuth_bins,
            elevation_bins=self.elevation_bins,
            elevation_min=self.elevation_min,
            elevation_max=self.elevation_max,
            origin=origin,
        )

    def to_dict(self) -> dict:
        return {
            "azimuth_bins": self.azimuth_bins,
            "elevation_bins": self.elevation_bins,
            "elevation_min": self.elevation_min,
            "elevation_max": self.elevation_max,
            "origin": [float(v) for v in self.origin],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SphericalGridSpec":
        return cls(
            azimuth_bins=int(data["azimuth_bins"]),
            elevation_bins=int(data["elevation_bins"]),
            elevation_min=float(data["elevation_min"]),
            elevation_max=float(data["elevation_max"]),
            origin=np.asarray(data.get("origin", [0.0, 0.0, 0.0]), dtype=np.float64),
        )


def grid_sim(origin=(0.0, 0.0, 0.0)) -> SphericalGridSpec:
    """36 x 9 grid spanning 37.5 deg of elevation around the simulation FOV.

    The band is centered on the 80-channel sensor's FOV midline (-6 deg),
    leaving a 2.75 deg margin past each elevation limit.
    """
    return SphericalGridSpec(
        azimuth_bins=36,
        elevation_bins=9,
        elevation_min=math.radians(-24.75),
        elevation_max=math.radians(12.75),
        origin=origin,
    )


def grid_vlp16(origin=(0.0, 0.0, 0.0)) -> SphericalGridSpec:
    """36 x 5 grid with 7.5 deg elevation bins, for +/-15 deg sensors."""
    return SphericalGridSpec(
        azimuth_bins=36,
        elevation_bins=5,
        elevation_min=math.radians(-18.75),
        elevation_max=math.radians(18.75),
        origin=origin,
    )


GRID_PRESETS = {"sim": grid_sim, "vlp16": grid_vlp16}


class VoxelKey(NamedTuple):
    azimuth_index: int
    elevation_index: int


@dataclass
class VoxelDiscrepancy:
    key: VoxelKey
    centroid1: np.ndarray
    centroid2: np.ndarray
    vector: np.ndarray
    count1: int
    count2: int

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass
class FieldStats:
    max_magnitude: float
    mean_magnitude: float
    median_magnitude: float
    populated_voxels: int

    def to_dict(self) -> dict:
        return {
            "max_magnitude": self.max_magnitude,
            "mean_magnitude": self.mean_magnitude,
            "median_magnitude": self.median_magnitude,
            "populated_voxels": self.populated_voxels,
        }


@dataclass
class DiscrepancyField:
    grid: SphericalGridSpec
    voxels: List[VoxelDiscrepancy]
    stats: FieldStats

    @property
    def is_empty(self) -> bool:
        return len(self.voxels) == 0

    def voxel(self, key: VoxelKey) -> Optional[VoxelDiscrepancy]:
        for vox in self.voxels:
            if vox.key == key:
                return vox
        return None


def bin_indices(points: np.ndarray, grid: SphericalGridSpec):
    """Vectorized voxel assignment.

    Returns (azimuth_index, elevation_index, in_band) arrays; indices are
    only meaningful where in_band is True. Points at the grid origin and
    points outside the elevation band are out.
    """
    r, az, el = cart_to_spherical_arrays(points, grid.origin)
    in_band = (r > 0.0) & (el >= grid.elevation_min) & (el < grid.elevation_max)
    az_idx = np.floor(az / grid.azimuth_width).astype(np.int64)
    np.clip(az_idx, 0, grid.azimuth_bins - 1, out=az_idx)
    el_idx = np.floor((el - grid.elevation_min) / grid.elevation_height).astype(np.int64)
    np.clip(el_idx, 0, grid.elevation_bins - 1, out=el_idx)
    return az_idx, el_idx, in_band


def voxel_of(p, grid: SphericalGridSpec) -> Optional[VoxelKey]:
    """Voxel containing one point, or None (origin or out of band)."""
    pts = as_point(p)[None, :]
    az_idx, el_idx, in_band = bin_indices(pts, grid)
    if not in_band[0]:
        return None
    return VoxelKey(int(az_idx[0]), int(el_idx[0]))


def _accumulate(points: np.ndarray, grid: SphericalGridSpec):
    az_idx, el_idx, in_band = bin_indices(points, grid)
    flat = az_idx[in_band] * grid.elevation_bins + el_idx[in_band]
    sums = np.zeros((grid.voxel_count, 3))
    counts = np.zeros(grid.voxel_count, dtype=np.int64)
    np.add.at(sums, flat, points[in_band])
    np.add.at(counts, flat, 1)
    return sums, counts


def compute_field(
    cloud1: PointCloud,
    cloud2_registered: PointCloud,
    grid: SphericalGridSpec,
    min_points: int = 1,
) -> DiscrepancyField:
    """Per-voxel centroid difference between a registered cloud pair.

    Both clouds must already be expressed in the cloud-1 frame and the grid
    origin placed at the cloud-1 sensor origin. Emits one record per voxel
    holding at least min_points from each cloud; the vector is exactly
    centroid2 - centroid1, componentwise.
    """
    if min_points < 1:
        raise ValueError("min_points must be >= 1")
    sums1, counts1 = _accumulate(cloud1.points, grid)
    sums2, counts2 = _accumulate(cloud2_registered.points, grid)
    populated = (counts1 >= min_points) & (counts2 >= min_points)

    voxels = []
    for flat in np.nonzero(populated)[0]:
        c1 = sums1[flat] / counts1[flat]
        c2 = sums2[flat] / counts2[flat]
        key = VoxelKey(int(flat // grid.elevation_bins), int(flat % grid.elevation_bins))
        voxels.append(
            VoxelDiscrepancy(
                key=key,
                centroid1=c1,
                centroid2=c2,
                vector=c2 - c1,
                count1=int(counts1[flat]),
                count2=int(counts2[flat]),
            )
        )
    return DiscrepancyField(grid=grid, voxels=voxels, stats=field_stats_of(voxels))


def field_stats_of(voxels: List[VoxelDiscrepancy]) -> FieldStats:
    if not voxels:
        return FieldStats(0.0, 0.0, 0.0, 0)
    mags = np.array([v.magnitude for v in voxels])
    return FieldStats(
        max_magnitude=float(mags.max()),
        mean_magnitude=float(mags.mean()),
        median_magnitude=float(np.median(mags)),
        populated_voxels=len(voxels),
    )


def field_stats(field: DiscrepancyField) -> FieldStats:
    """Summary statistics over the populated voxels of a field."""
    return field_stats_of(field.voxels)


def field_to_dict(field: DiscrepancyField) -> dict:
    """JSON-ready form of a field: grid, voxel records, stats.

    This layout is the exchange contract for exports and the HTTP API.
    """
    return {
        "grid": field.grid.to_dict(),
        "voxels": [
            {
                "azimuth_index": v.key.azimuth_index,
                "elevation_index": v.key.elevation_index,
                "centroid1": [float(x) for x in v.centroid1],
                "centroid2": [float(x) for x in v.centroid2],
                "vector": [float(x) for x in v.vector],
                "count1": v.count1,
                "count2": v.count2,
            }
            for v in field.voxels
        ],
        "stats": field.stats.to_dict(),
    }


def field_from_dict(data: dict) -> DiscrepancyField:
    grid = SphericalGridSpec.from_dict(data["grid"])
    voxels = [
        VoxelDiscrepancy(
            key=VoxelKey(int(rec["azimuth_index"]), int(rec["elevation_index"])),
            centroid1=np.asarray(rec["centroid1"], dtype=np.float64),
            centroid2=np.asarray(rec["centroid2"], dtype=np.float64),
            vector=np.asarray(rec["vector"], dtype=np.float64),
            count1=int(rec["count1"]),
            count2=int(rec["count2"]),
        )
        for rec in data["voxels"]
    ]
    stats = data.get("stats")
    if stats is not None:
        parsed = FieldStats(
            max_magnitude=float(stats["max_magnitude"]),
            mean_magnitude=float(stats["mean_magnitude"]),
            median_magnitude=float(stats["median_magnitude"]),
            populated_voxels=int(stats["populated_voxels"]),
        )
    else:
        parsed = field_stats_of(voxels)
    return DiscrepancyField(grid=grid, voxels=voxels, stats=parsed)
