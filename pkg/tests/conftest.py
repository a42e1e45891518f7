"""Shared fixtures: one simulated cloud pair reused across the suite.

Ray casting the default scene twice costs about a second, so the pair is
built once per pytest run. Tests must not mutate these clouds; anything
that needs a session builds its own from the shared pair.
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from scandiff.geometry import RigidTransform
from scandiff.raycast import raycast_cloud
from scandiff.registration import register_with_truth
from scandiff.scene import build_default_scene, default_sensor_sim


POSE1 = RigidTransform(translation=np.array([0.0, 0.0, 3.0]))
POSE2 = RigidTransform(translation=np.array([1.0, 1.0, 3.0]), yaw=0.05)


@pytest.fixture(scope="session")
def sim_pair():
    scene = build_default_scene()
    sensor = default_sensor_sim()
    cloud1 = raycast_cloud(scene, POSE1, sensor, label="scan1")
    cloud2 = raycast_cloud(scene, POSE2, sensor, label="scan2")
    registered, registration = register_with_truth(cloud2, POSE1, POSE2)
    return SimpleNamespace(
        scene=scene,
        sensor=sensor,
        pose1=POSE1,
        pose2=POSE2,
        cloud1=cloud1,
        cloud2_raw=cloud2,
        cloud2=registered,
        registration=registration,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(20260821)


def random_cloud_points(rng, n, spread=10.0):
    # keep a safe distance from the origin so spherical conversion is stable
    pts = rng.uniform(-spread, spread, size=(n, 3))
    r = np.linalg.norm(pts, axis=1)
    return pts[r > 0.5]


@pytest.fixture()
def saved_pair(tmp_path, sim_pair):
    """File-backed copies of the shared pair, for session save/load tests."""
    from scandiff import cloudio
    from scandiff.registration import apply_registration

    c1 = cloudio.save_cloud_ply(sim_pair.cloud1, tmp_path / "scan1.ply")
    c2_raw = cloudio.save_cloud_ply(sim_pair.cloud2_raw, tmp_path / "scan2.ply")
    c2 = apply_registration(c2_raw, sim_pair.registration.transform)
    return SimpleNamespace(
        dir=tmp_path,
        cloud1=c1,
        cloud2=c2,
        registration=sim_pair.registration,
    )


def assert_transforms_close(a: RigidTransform, b: RigidTransform, tol=1e-9):
    np.testing.assert_allclose(a.matrix, b.matrix, atol=tol)
    np.testing.assert_allclose(a.translation, b.translation, atol=tol)


def radians(deg: float) -> float:
    return math.radians(deg)
