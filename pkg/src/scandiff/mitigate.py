"""Point-pruning filters for hypothesized adversities.

Three filters: ego-return removal (spherical radius about the sensor),
field-of-view filtering (points of one cloud outside the elevation band or
range reach of the other vantage point), and shadow filtering (points of one
cloud that the other sensor's returns say it could not have seen). Filters
only remove points, never move them, and preserve input order.

A pipeline applies each mitigation symmetrically to both clouds of a
registered pair. Within one step, both directions read the step-entry
clouds, so the two prunings of a step never feed each other. Reports carry
indices into the clouds the pipeline started from, which is what a viewer
needs to color removed points on the raw pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import List, Tuple

import numpy as np

from .geometry import PointCloud, as_point, cart_to_spherical_arrays

EGO_KIND = "ego_removal"
FOV_KIND = "fov_filter"
SHADOW_KIND = "shadow_filter"

DEFAULT_EGO_RADIUS = 3.0
DEFAULT_FOV_ELEVATION_MIN = math.radians(-22.0)
DEFAULT_FOV_ELEVATION_MAX = math.radians(10.0)
DEFAULT_FOV_MAX_RANGE = 120.0
# Fine occupancy grid for the default 80-channel sensor: azimuth at 2x the
# sample spacing so bins are reliably occupied, elevation at 1x (each bin
# holds exactly one channel), margin sized so the within-bin range spread of
# grazing ground (about r^2 * el_res / h) stays below it across the scene.
# A wider elevation bin or a slimmer margin starts pruning open ground far
# from any occluder.
DEFAULT_SHADOW_AZ_RES = math.radians(1.0)
DEFAULT_SHADOW_EL_RES = math.radians(0.4)
DEFAULT_SHADOW_MARGIN = 1.0

_PARAM_NAMES = {
    EGO_KIND: {"radius"},
    FOV_KIND: {"elevation_min", "elevation_max", "max_range"},
    SHADOW_KIND: {"fine_az_res", "fine_el_res", "range_margin"},
}


@dataclass(frozen=True)
class Mitigation:
    """One filter with its parameters, as stored in a session history."""

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in _PARAM_NAMES:
            raise ValueError(f"unknown mitigation kind: {self.kind!r}")
        unknown = set(self.params) - _PARAM_NAMES[self.kind]
        if unknown:
            raise ValueError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        missing = _PARAM_NAMES[self.kind] - set(self.params)
        if missing:
            raise ValueError(f"{self.kind}: missing parameters {sorted(missing)}")
        p = self.params
        if self.kind == EGO_KIND and p["radius"] <= 0:
            raise ValueError("ego radius must be positive")
        if self.kind == FOV_KIND:
            if not p["elevation_min"] < p["elevation_max"]:
                raise ValueError("fov elevation_min must be below elevation_max")
            if p["max_range"] <= 0:
                raise ValueError("fov max_range must be positive")
        if self.kind == SHADOW_KIND:
            if p["range_margin"] < 0:
                raise ValueError("shadow range_margin must be >= 0")
            if p["fine_az_res"] <= 0 or p["fine_el_res"] <= 0:
                raise ValueError("shadow grid resolutions must be positive")

    def describe(self) -> str:
        parts = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({parts})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameters": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "Mitigation":
        return cls(kind=data["kind"], params={k: float(v) for k, v in data["parameters"].items()})


def ego_mitigation(radius: float = DEFAULT_EGO_RADIUS) -> Mitigation:
    return Mitigation(EGO_KIND, {"radius": float(radius)})


def fov_mitigation(
    elevation_min: float = DEFAULT_FOV_ELEVATION_MIN,
    elevation_max: float = DEFAULT_FOV_ELEVATION_MAX,
    max_range: float = DEFAULT_FOV_MAX_RANGE,
) -> Mitigation:
    return Mitigation(
        FOV_KIND,
        {
            "elevation_min": float(elevation_min),
            "elevation_max": float(elevation_max),
            "max_range": float(max_range),
        },
    )


def shadow_mitigation(
    fine_az_res: float = DEFAULT_SHADOW_AZ_RES,
    fine_el_res: float = DEFAULT_SHADOW_EL_RES,
    range_margin: float = DEFAULT_SHADOW_MARGIN,
) -> Mitigation:
    return Mitigation(
        SHADOW_KIND,
        {
            "fine_az_res": float(fine_az_res),
            "fine_el_res": float(fine_el_res),
            "range_margin": float(range_margin),
        },
    )


_CLI_ALIASES = {"ego": EGO_KIND, "fov": FOV_KIND, "shadow": SHADOW_KIND}


def parse_mitigation(text: str) -> Mitigation:
    """Parse CLI shorthand like ego:radius=3 or fov:el_min=-22,el_max=10.

    Angles on the command line are degrees; unspecified parameters take the
    defaults above. Shadow shorthand keys: margin, az_res, el_res (degrees).
    """
    name, _, arg_text = text.partition(":")
    kind = _CLI_ALIASES.get(name, name)
    kv = {}
    if arg_text:
        for piece in arg_text.split(","):
            key, sep, value = piece.partition("=")
            if not sep:
                raise ValueError(f"bad mitigation parameter {piece!r} (want key=value)")
            try:
                kv[key.strip()] = float(value)
            except ValueError:
                raise ValueError(f"bad mitigation parameter value {piece!r}") from None
    if kind == EGO_KIND:
        known = {"radius"}
        _reject_unknown(kv, known, name)
        return ego_mitigation(radius=kv.get("radius", DEFAULT_EGO_RADIUS))
    if kind == FOV_KIND:
        known = {"el_min", "el_max", "max_range"}
        _reject_unknown(kv, known, name)
        return fov_mitigation(
            elevation_min=math.radians(kv["el_min"]) if "el_min" in kv else DEFAULT_FOV_ELEVATION_MIN,
            elevation_max=math.radians(kv["el_max"]) if "el_max" in kv else DEFAULT_FOV_ELEVATION_MAX,
            max_range=kv.get("max_range", DEFAULT_FOV_MAX_RANGE),
        )
    if kind == SHADOW_KIND:
        known = {"margin", "az_res", "el_res"}
        _reject_unknown(kv, known, name)
        return shadow_mitigation(
            fine_az_res=math.radians(kv["az_res"]) if "az_res" in kv else DEFAULT_SHADOW_AZ_RES,
            fine_el_res=math.radians(kv["el_res"]) if "el_res" in kv else DEFAULT_SHADOW_EL_RES,
            range_margin=kv.get("margin", DEFAULT_SHADOW_MARGIN),
        )
    raise ValueError(f"unknown mitigation {name!r} (want ego, fov, or shadow)")


def _reject_unknown(kv: dict, known: set, name: str) -> None:
    unknown = set(kv) - known
    if unknown:
        raise ValueError(f"{name}: unknown parameters {sorted(unknown)}")


@dataclass
class MitigationReport:
    """Removal bookkeeping for one mitigation application.

    Standalone filter calls fill the cloud-1 slot; a pipeline step merges
    the two per-cloud applications into one report with both slots set.
    """

    kind: str
    removed_from_cloud1: int = 0
    removed_from_cloud2: int = 0
    removed_indices1: List[int] = dataclass_field(default_factory=list)
    removed_indices2: List[int] = dataclass_field(default_factory=list)

    def __post_init__(self):
        if self.removed_from_cloud1 != len(self.removed_indices1):
            raise ValueError("cloud-1 removal count disagrees with its index list")
        if self.removed_from_cloud2 != len(self.removed_indices2):
            raise ValueError("cloud-2 removal count disagrees with its index list")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "removed_from_cloud1": self.removed_from_cloud1,
            "removed_from_cloud2": self.removed_from_cloud2,
            "removed_indices1": list(self.removed_indices1),
            "removed_indices2": list(self.removed_indices2),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MitigationReport":
        return cls(
            kind=data["kind"],
            removed_from_cloud1=int(data["removed_from_cloud1"]),
            removed_from_cloud2=int(data["removed_from_cloud2"]),
            removed_indices1=[int(i) for i in data["removed_indices1"]],
            removed_indices2=[int(i) for i in data["removed_indices2"]],
        )


def _report_for(kind: str, removed_mask: np.ndarray) -> MitigationReport:
    idx = [int(i) for i in np.nonzero(removed_mask)[0]]
    return MitigationReport(kind=kind, removed_from_cloud1=len(idx), removed_indices1=idx)


def remove_ego(cloud: PointCloud, center, radius: float) -> Tuple[PointCloud, MitigationReport]:
    """Drop returns within `radius` of `center` (strictly inside)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = as_point(center)
    if len(cloud) == 0:
        return cloud.take(np.zeros(0, dtype=bool)), _report_for(EGO_KIND, np.zeros(0, dtype=bool))
    dist = np.linalg.norm(cloud.points - center, axis=1)
    removed = dist < radius
    return cloud.take(~removed), _report_for(EGO_KIND, removed)


def fov_filter(
    cloud: PointCloud,
    other_origin,
    elevation_min: float = DEFAULT_FOV_ELEVATION_MIN,
    elevation_max: float = DEFAULT_FOV_ELEVATION_MAX,
    max_range: float = DEFAULT_FOV_MAX_RANGE,
) -> Tuple[PointCloud, MitigationReport]:
    """Drop points outside the other vantage point's elevation band or reach.

    A point survives when its elevation seen from other_origin lies within
    [elevation_min, elevation_max] (closed band) and its range is at most
    max_range.
    """
    if not elevation_min < elevation_max:
        raise ValueError("elevation_min must be below elevation_max")
    other_origin = as_point(other_origin)
    if len(cloud) == 0:
        return cloud.take(np.zeros(0, dtype=bool)), _report_for(FOV_KIND, np.zeros(0, dtype=bool))
    r, _, el = cart_to_spherical_arrays(cloud.points, other_origin)
    removed = (el < elevation_min) | (el > elevation_max) | (r > max_range)
    return cloud.take(~removed), _report_for(FOV_KIND, removed)


def shadow_filter(
    cloud: PointCloud,
    other_cloud: PointCloud,
    other_origin,
    fine_az_res: float = DEFAULT_SHADOW_AZ_RES,
    fine_el_res: float = DEFAULT_SHADOW_EL_RES,
    range_margin: float = DEFAULT_SHADOW_MARGIN,
) -> Tuple[PointCloud, MitigationReport]:
    """Drop points of `cloud` that `other_cloud`'s returns occlude.

    other_cloud is binned into a fine spherical occupancy grid about
    other_origin, keeping the minimum return range per bin. A point of
    `cloud` whose bin is occupied and whose range exceeds that minimum by
    more than range_margin could not have been seen from other_origin, so
    it goes. Bins the other cloud never hit leave points alone.
    """
    if fine_az_res <= 0 or fine_el_res <= 0:
        raise ValueError("fine grid resolutions must be positive")
    if range_margin < 0:
        raise ValueError("range_margin must be >= 0")
    other_origin = as_point(other_origin)
    if len(cloud) == 0 or len(other_cloud) == 0:
        keep = np.ones(len(cloud), dtype=bool)
        return cloud.take(keep), _report_for(SHADOW_KIND, ~keep)

    n_az = max(1, int(round(2.0 * math.pi / fine_az_res)))
    az_width = 2.0 * math.pi / n_az

    r_a, az_a, el_a = cart_to_spherical_arrays(cloud.points, other_origin)
    r_b, az_b, el_b = cart_to_spherical_arrays(other_cloud.points, other_origin)
    valid_b = r_b > 0.0

    # elevation bins are anchored at the lowest elevation either cloud uses
    el_floor = min(el_a.min(), el_b[valid_b].min() if valid_b.any() else el_a.min())
    el_idx_a = np.floor((el_a - el_floor) / fine_el_res).astype(np.int64)
    el_idx_b = np.floor((el_b - el_floor) / fine_el_res).astype(np.int64)
    az_idx_a = np.minimum(np.floor(az_a / az_width).astype(np.int64), n_az - 1)
    az_idx_b = np.minimum(np.floor(az_b / az_width).astype(np.int64), n_az - 1)

    n_el = int(max(el_idx_a.max(), el_idx_b[valid_b].max() if valid_b.any() else 0)) + 1
    min_range = np.full(n_az * n_el, np.inf)
    flat_b = az_idx_b[valid_b] * n_el + el_idx_b[valid_b]
    np.minimum.at(min_range, flat_b, r_b[valid_b])

    flat_a = az_idx_a * n_el + el_idx_a
    removed = (r_a > 0.0) & (r_a > min_range[flat_a] + range_margin)
    return cloud.take(~removed), _report_for(SHADOW_KIND, removed)


def _apply_one(
    mit: Mitigation,
    cloud1: PointCloud,
    cloud2: PointCloud,
    origin1: np.ndarray,
    origin2: np.ndarray,
):
    p = mit.params
    if mit.kind == EGO_KIND:
        c1, rep1 = remove_ego(cloud1, origin1, p["radius"])
        c2, rep2 = remove_ego(cloud2, origin2, p["radius"])
    elif mit.kind == FOV_KIND:
        c1, rep1 = fov_filter(cloud1, origin2, p["elevation_min"], p["elevation_max"], p["max_range"])
        c2, rep2 = fov_filter(cloud2, origin1, p["elevation_min"], p["elevation_max"], p["max_range"])
    elif mit.kind == SHADOW_KIND:
        c1, rep1 = shadow_filter(cloud1, cloud2, origin2, p["fine_az_res"], p["fine_el_res"], p["range_margin"])
        c2, rep2 = shadow_filter(cloud2, cloud1, origin1, p["fine_az_res"], p["fine_el_res"], p["range_margin"])
    else:
        raise ValueError(f"unknown mitigation kind: {mit.kind!r}")
    return c1, c2, rep1, rep2


def apply_pipeline(
    cloud1: PointCloud,
    cloud2_registered: PointCloud,
    origin1,
    origin2,
    mitigations: List[Mitigation],
) -> Tuple[PointCloud, PointCloud, List[MitigationReport]]:
    """Apply mitigations in order, symmetrically, with combined reports.

    Ego removal uses each cloud's own origin; fov and shadow run cloud 1
    against origin 2 and cloud 2 against origin 1, both directions reading
    the clouds as they stood at the start of the step. Report indices refer
    to the clouds this call received, not to a step's intermediate clouds.
    """
    origin1 = as_point(origin1)
    origin2 = as_point(origin2)
    c1, c2 = cloud1, cloud2_registered
    live1 = np.arange(len(c1))
    live2 = np.arange(len(c2))
    reports = []
    for mit in mitigations:
        new1, new2, rep1, rep2 = _apply_one(mit, c1, c2, origin1, origin2)
        global1 = [int(live1[i]) for i in rep1.removed_indices1]
        global2 = [int(live2[i]) for i in rep2.removed_indices1]
        reports.append(
            MitigationReport(
                kind=mit.kind,
                removed_from_cloud1=len(global1),
                removed_from_cloud2=len(global2),
                removed_indices1=global1,
                removed_indices2=global2,
            )
        )
        keep1 = np.ones(len(c1), dtype=bool)
        keep1[rep1.removed_indices1] = False
        keep2 = np.ones(len(c2), dtype=bool)
        keep2[rep2.removed_indices1] = False
        live1 = live1[keep1]
        live2 = live2[keep2]
        c1, c2 = new1, new2
    return c1, c2, reports
