"""Synthetic scene primitives and lidar sensor models.

The default scene is a 26 x 26 m ground plane with four "buildings" placed
one per quadrant: three rectangular prisms (5x5, 8x5 and 7x5 m footprints)
and one 5 m diameter cylinder, all 10 m tall with their bases on the ground.
The cylinder sits in the lower-left quadrant so that its shadow lands where
the drill-down workflows expect it. Positions are not dictated by the source
scene, only footprints are, so all placements are configurable.

Scene files are JSON: ``{"primitives": [{"kind": ..., ...}, ...]}`` with the
field names matching the dataclasses below.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Union

import numpy as np


@dataclass(frozen=True)
class GroundPlane:
    """Rectangular patch of the z = 0 plane, centered on the origin."""

    extent_x: float
    extent_y: float
    kind = "ground_plane"

    def __post_init__(self):
        if self.extent_x <= 0 or self.extent_y <= 0:
            raise ValueError("ground plane extents must be positive")


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangular prism with its base on the ground."""

    center_x: float
    center_y: float
    size_x: float
    size_y: float
    height: float
    kind = "box"

    def __post_init__(self):
        if min(self.size_x, self.size_y, self.height) <= 0:
            raise ValueError("box dimensions must be positive")


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder with its base on the ground."""

    center_x: float
    center_y: float
    diameter: float
    height: float
    kind = "cylinder"

    def __post_init__(self):
        if self.diameter <= 0 or self.height <= 0:
            raise ValueError("cylinder dimensions must be positive")


ScenePrimitive = Union[GroundPlane, Box, Cylinder]

_PRIMITIVE_KINDS = {"ground_plane": GroundPlane, "box": Box, "cylinder": Cylinder}


@dataclass
class Scene:
    primitives: list

    def __post_init__(self):
        grounds = [p for p in self.primitives if isinstance(p, GroundPlane)]
        if len(grounds) > 1:
            raise ValueError("a scene may contain at most one ground plane")

    def to_dict(self) -> dict:
        records = []
        for prim in self.primitives:
            rec = {"kind": prim.kind}
            rec.update(asdict(prim))
            records.append(rec)
        return {"primitives": records}

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        prims = []
        for i, rec in enumerate(data.get("primitives", [])):
            rec = dict(rec)
            kind = rec.pop("kind", None)
            if kind not in _PRIMITIVE_KINDS:
                raise ValueError(f"primitive {i}: unknown kind {kind!r}")
            try:
                prims.append(_PRIMITIVE_KINDS[kind](**rec))
            except TypeError as exc:
                raise ValueError(f"primitive {i} ({kind}): {exc}") from exc
        return cls(primitives=prims)


def build_default_scene() -> Scene:
    """The four-building intersection scene used by the simulation study."""
    return Scene(
        primitives=[
            GroundPlane(extent_x=26.0, extent_y=26.0),
            Box(center_x=8.5, center_y=8.5, size_x=5.0, size_y=5.0, height=10.0),
            Box(center_x=-8.5, center_y=8.5, size_x=8.0, size_y=5.0, height=10.0),
            Box(center_x=8.5, center_y=-8.5, size_x=7.0, size_y=5.0, height=10.0),
            Cylinder(center_x=-8.5, center_y=-8.5, diameter=5.0, height=10.0),
        ]
    )


def load_scene(path) -> Scene:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return Scene.from_dict(data)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SensorModel:
    """Spinning-lidar ray pattern: a fan of elevation channels swept in azimuth.

    Channel elevations are bottom-aligned: channel k fires at
    ``elevation_min + k * spacing`` with ``spacing = (elevation_max -
    elevation_min) / elevation_channels``, so the nominal upper bound is not
    itself a channel. Azimuth steps are uniform over the full revolution.
    """

    elevation_channels: int
    elevation_min: float
    elevation_max: float
    azimuth_steps: int
    max_range: float = 120.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.elevation_channels < 1:
            raise ValueError("need at least one elevation channel")
        if self.azimuth_steps < 1:
            raise ValueError("need at least one azimuth step")
        if not self.elevation_min < self.elevation_max:
            raise ValueError("elevation_min must be below elevation_max")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def elevation_spacing(self) -> float:
        return (self.elevation_max - self.elevation_min) / self.elevation_channels

    def channel_elevations(self) -> np.ndarray:
        return self.elevation_min + np.arange(self.elevation_channels) * self.elevation_spacing

    def azimuth_angles(self) -> np.ndarray:
        return np.arange(self.azimuth_steps) * (2.0 * np.pi / self.azimuth_steps)

    def to_dict(self) -> dict:
        return {
            "elevation_channels": self.elevation_channels,
            "elevation_min": self.elevation_min,
            "elevation_max": self.elevation_max,
            "azimuth_steps": self.azimuth_steps,
            "max_range": self.max_range,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SensorModel":
        return cls(
            elevation_channels=int(data["elevation_channels"]),
            elevation_min=float(data["elevation_min"]),
            elevation_max=float(data["elevation_max"]),
            azimuth_steps=int(data["azimuth_steps"]),
            max_range=float(data.get("max_range", 120.0)),
            noise_sigma=float(data.get("noise_sigma", 0.0)),
        )


def default_sensor_sim() -> SensorModel:
    """80-channel simulation sensor: 0.4 deg channels from -22 to +10 deg.

    Azimuth resolution defaults to 720 steps (0.5 deg), comparable point
    density to commercial spinning units. Measurement noise is suppressed.
    """
    return SensorModel(
        elevation_channels=80,
        elevation_min=math.radians(-22.0),
        elevation_max=math.radians(10.0),
        azimuth_steps=720,
        max_range=120.0,
        noise_sigma=0.0,
    )


def vlp16_sensor() -> SensorModel:
    """VLP-16 style preset: 16 channels spanning -15 to +15 deg elevation."""
    return SensorModel(
        elevation_channels=16,
        elevation_min=math.radians(-15.0),
        elevation_max=math.radians(15.0),
        azimuth_steps=1800,
        max_range=100.0,
        noise_sigma=0.0,
    )


SENSOR_PRESETS = {"sim80": default_sensor_sim, "vlp16": vlp16_sensor}


def load_sensor(spec: str) -> SensorModel:
    """Resolve a sensor preset name or a JSON file path."""
    if spec in SENSOR_PRESETS:
        return SENSOR_PRESETS[spec]()
    path = Path(spec)
    if not path.exists():
        raise ValueError(f"unknown sensor preset or missing file: {spec}")
    return SensorModel.from_dict(json.loads(path.read_text(encoding="utf-8")))
