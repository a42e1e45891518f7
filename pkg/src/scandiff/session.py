"""The analysis loop: iterations, marked regions, and session persistence.

A session owns a registered cloud pair, the binning grid, and an ordered
iteration history. Iteration 0 is always the unmitigated baseline. Every
later iteration extends the previous mitigation list by at most one entry,
and its clouds are always recomputed from the raw registered pair with the
full cumulative list; nothing is ever filtered incrementally, so a stored
history can be replayed bit for bit.

The working frame is cloud 1's sensor frame: its origin is (0, 0, 0), the
grid is centered there, and sensor 2 sits at the registration transform's
translation. Session files are JSON holding everything except the raw
clouds, which are referenced by path and content hash; loading re-reads and
re-registers them, and a hash mismatch aborts with "stale cloud reference".
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import cloudio
from .field import (
    DiscrepancyField,
    SphericalGridSpec,
    VoxelKey,
    compute_field,
    field_from_dict,
    field_to_dict,
    grid_sim,
)
from .geometry import PointCloud
from .mitigate import Mitigation, MitigationReport, apply_pipeline
from .registration import RegistrationResult, apply_registration

WORKING_ORIGIN = np.zeros(3)


@dataclass
class IterationRecord:
    mitigations: List[Mitigation]
    field: DiscrepancyField
    reports: List[MitigationReport]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "mitigations": [m.to_dict() for m in self.mitigations],
            "field": field_to_dict(self.field),
            "reports": [r.to_dict() for r in self.reports],
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        return cls(
            mitigations=[Mitigation.from_dict(m) for m in data["mitigations"]],
            field=field_from_dict(data["field"]),
            reports=[MitigationReport.from_dict(r) for r in data["reports"]],
            note=data.get("note", ""),
        )


@dataclass
class MarkedRegion:
    label: str
    voxel_keys: List[VoxelKey]
    created_at_iteration: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "voxel_keys": [[k.azimuth_index, k.elevation_index] for k in self.voxel_keys],
            "created_at_iteration": self.created_at_iteration,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarkedRegion":
        return cls(
            label=data["label"],
            voxel_keys=[VoxelKey(int(a), int(e)) for a, e in data["voxel_keys"]],
            created_at_iteration=int(data["created_at_iteration"]),
        )


@dataclass
class Session:
    """Registered pair plus the full mitigation/field history."""

    cloud1_raw: PointCloud
    cloud2_raw: PointCloud  # registered into the cloud-1 frame, unmitigated
    registration: RegistrationResult
    grid: SphericalGridSpec
    iterations: List[IterationRecord] = dataclass_field(default_factory=list)
    regions: List[MarkedRegion] = dataclass_field(default_factory=list)
    min_points: int = 1

    @property
    def origin1(self) -> np.ndarray:
        return WORKING_ORIGIN.copy()

    @property
    def origin2(self) -> np.ndarray:
        return self.registration.transform.translation.copy()

    def current_mitigations(self) -> List[Mitigation]:
        return list(self.iterations[-1].mitigations) if self.iterations else []


def build_session(
    cloud1: PointCloud,
    cloud2_registered: PointCloud,
    registration: RegistrationResult,
    grid: Optional[SphericalGridSpec] = None,
    min_points: int = 1,
) -> Session:
    """Assemble a session and compute its baseline iteration."""
    grid = grid_sim() if grid is None else grid
    session = Session(
        cloud1_raw=cloud1,
        cloud2_raw=cloud2_registered,
        registration=registration,
        grid=grid.with_origin(WORKING_ORIGIN),
        min_points=min_points,
    )
    run_iteration(session, None)
    return session


def run_iteration(
    session: Session, new_mitigation: Optional[Mitigation] = None, note: str = ""
) -> IterationRecord:
    """One pass of the loop: extend the mitigation list, recompute the field.

    The pipeline always starts from the raw registered clouds with the
    cumulative list. On any error the session is left unchanged.
    """
    mitigations = session.current_mitigations()
    if new_mitigation is not None:
        mitigations.append(new_mitigation)
    c1, c2, reports = apply_pipeline(
        session.cloud1_raw,
        session.cloud2_raw,
        session.origin1,
        session.origin2,
        mitigations,
    )
    field = compute_field(c1, c2, session.grid, min_points=session.min_points)
    record = IterationRecord(mitigations=mitigations, field=field, reports=reports, note=note)
    session.iterations.append(record)
    return record


def mitigated_clouds(session: Session, iteration: int) -> Tuple[PointCloud, PointCloud]:
    """Clouds as they stood at an iteration, replayed from the raw pair."""
    record = session.iterations[iteration]
    c1, c2, _ = apply_pipeline(
        session.cloud1_raw,
        session.cloud2_raw,
        session.origin1,
        session.origin2,
        record.mitigations,
    )
    return c1, c2


def mark_region(session: Session, label: str, voxel_keys) -> MarkedRegion:
    """Store an analyst-drawn contour as a set of voxel keys."""
    keys = []
    for k in voxel_keys:
        key = VoxelKey(int(k[0]), int(k[1]))
        if not (0 <= key.azimuth_index < session.grid.azimuth_bins):
            raise ValueError(f"azimuth_index {key.azimuth_index} out of range")
        if not (0 <= key.elevation_index < session.grid.elevation_bins):
            raise ValueError(f"elevation_index {key.elevation_index} out of range")
        keys.append(key)
    region = MarkedRegion(
        label=label,
        voxel_keys=keys,
        created_at_iteration=len(session.iterations) - 1,
    )
    session.regions.append(region)
    return region


def region_stats(session: Session, region: MarkedRegion, iteration: int) -> dict:
    """Magnitude summary of a marked region at a given iteration."""
    field = session.iterations[iteration].field
    wanted = set(region.voxel_keys)
    mags = [v.magnitude for v in field.voxels if v.key in wanted]
    return {
        "label": region.label,
        "iteration": iteration,
        "populated": len(mags),
        "max_magnitude": max(mags) if mags else 0.0,
        "mean_magnitude": float(np.mean(mags)) if mags else 0.0,
    }


def _cloud_ref(cloud: PointCloud, session_dir: Path) -> dict:
    if not cloud.source_path or not cloud.source_sha256:
        raise ValueError(
            "cloud has no source file; write it with save_cloud before saving the session"
        )
    path = Path(cloud.source_path)
    try:
        stored = os.path.relpath(path, session_dir)
    except ValueError:  # different drive on windows
        stored = str(path)
    return {
        "path": stored,
        "sha256": cloud.source_sha256,
        "format": cloudio.detect_format(path),
        "label": cloud.label,
    }


def save_session(session: Session, path) -> None:
    path = Path(path)
    data = {
        "version": 1,
        "cloud1": _cloud_ref(session.cloud1_raw, path.parent),
        "cloud2": _cloud_ref(session.cloud2_raw, path.parent),
        "registration": session.registration.to_dict(),
        "grid": session.grid.to_dict(),
        "min_points": session.min_points,
        "iterations": [rec.to_dict() for rec in session.iterations],
        "regions": [reg.to_dict() for reg in session.regions],
    }
    path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def _load_ref(ref: dict, session_dir: Path) -> PointCloud:
    path = Path(ref["path"])
    if not path.is_absolute():
        path = session_dir / path
    if not path.exists():
        raise ValueError(f"stale cloud reference: {path} does not exist")
    digest = cloudio.sha256_file(path)
    if digest != ref["sha256"]:
        raise ValueError(f"stale cloud reference: {path} content hash changed")
    cloud = cloudio.load_cloud(path, format=ref.get("format"))
    label = ref.get("label", "")
    if label and label != cloud.label:
        cloud = PointCloud(
            points=cloud.points,
            sensor_pose=cloud.sensor_pose,
            label=label,
            source_path=cloud.source_path,
            source_sha256=cloud.source_sha256,
        )
    return cloud


def load_session(path) -> Session:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    registration = RegistrationResult.from_dict(data["registration"])
    cloud1 = _load_ref(data["cloud1"], path.parent)
    cloud2_file = _load_ref(data["cloud2"], path.parent)
    cloud2 = apply_registration(cloud2_file, registration.transform)
    return Session(
        cloud1_raw=cloud1,
        cloud2_raw=cloud2,
        registration=registration,
        grid=SphericalGridSpec.from_dict(data["grid"]),
        iterations=[IterationRecord.from_dict(rec) for rec in data["iterations"]],
        regions=[MarkedRegion.from_dict(reg) for reg in data["regions"]],
        min_points=int(data.get("min_points", 1)),
    )


def _fields_equal(a: DiscrepancyField, b: DiscrepancyField) -> bool:
    if a.grid.to_dict() != b.grid.to_dict() or len(a.voxels) != len(b.voxels):
        return False
    for va, vb in zip(a.voxels, b.voxels):
        if va.key != vb.key or va.count1 != vb.count1 or va.count2 != vb.count2:
            return False
        if not (
            np.array_equal(va.centroid1, vb.centroid1)
            and np.array_equal(va.centroid2, vb.centroid2)
            and np.array_equal(va.vector, vb.vector)
        ):
            return False
    return a.stats.to_dict() == b.stats.to_dict()


def sessions_equal(a: Session, b: Session) -> bool:
    """Deep structural equality, exact on every float."""
    if not (
        np.array_equal(a.cloud1_raw.points, b.cloud1_raw.points)
        and np.array_equal(a.cloud2_raw.points, b.cloud2_raw.points)
    ):
        return False
    if a.registration.to_dict() != b.registration.to_dict():
        return False
    if a.grid.to_dict() != b.grid.to_dict() or a.min_points != b.min_points:
        return False
    if len(a.iterations) != len(b.iterations) or len(a.regions) != len(b.regions):
        return False
    for ra, rb in zip(a.iterations, b.iterations):
        if [m.to_dict() for m in ra.mitigations] != [m.to_dict() for m in rb.mitigations]:
            return False
        if [r.to_dict() for r in ra.reports] != [r.to_dict() for r in rb.reports]:
            return False
        if ra.note != rb.note or not _fields_equal(ra.field, rb.field):
            return False
    for ga, gb in zip(a.regions, b.regions):
        if ga.to_dict() != gb.to_dict():
            return False
    return True
