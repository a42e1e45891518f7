"""Command-line interface.

Subcommands: simulate, register, field, mitigate, stats, report, serve.
Pose arguments are comma-separated x,y,z,roll,pitch,yaw with angles in
radians; grid specs are az_bins,el_bins,el_min_deg,el_max_deg with the
band in degrees, matching the mitigation shorthand (fov:el_min=-22,...).
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import cloudio, report
from .field import GRID_PRESETS, SphericalGridSpec, compute_field, grid_sim
from .geometry import RigidTransform
from .mitigate import parse_mitigation
from .raycast import raycast_cloud
from .registration import icp_register, register_with_truth
from .scene import build_default_scene, load_scene, load_sensor
from .session import (
    build_session,
    load_session,
    mitigated_clouds,
    run_iteration,
    save_session,
)


def parse_pose(text: str) -> RigidTransform:
    parts = text.split(",")
    if len(parts) != 6:
        raise ValueError(f"pose needs 6 comma-separated values, got {len(parts)}: {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"non-numeric pose component in {text!r}") from None
    return RigidTransform(
        translation=np.array(vals[:3]), roll=vals[3], pitch=vals[4], yaw=vals[5]
    )


def parse_grid(text: str) -> SphericalGridSpec:
    if text in GRID_PRESETS:
        return GRID_PRESETS[text]()
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(
            f"grid spec needs az_bins,el_bins,el_min_deg,el_max_deg or a preset name, got {text!r}"
        )
    return SphericalGridSpec(
        azimuth_bins=int(parts[0]),
        elevation_bins=int(parts[1]),
        elevation_min=math.radians(float(parts[2])),
        elevation_max=math.radians(float(parts[3])),
    )


def cmd_simulate(args) -> int:
    scene = build_default_scene() if args.scene == "default" else load_scene(args.scene)
    sensor = load_sensor(args.sensor)
    pose = parse_pose(args.pose)
    cloud = raycast_cloud(scene, pose, sensor, label=args.label, seed=args.seed)
    cloudio.save_cloud(cloud, args.out)
    print(f"{args.out}: {len(cloud)} points from pose {args.pose}")
    return 0


def cmd_register(args) -> int:
    cloud1 = cloudio.load_cloud(args.cloud1)
    cloud2 = cloudio.load_cloud(args.cloud2)
    if args.icp:
        result = icp_register(cloud1, cloud2)
        from .registration import apply_registration

        registered = apply_registration(cloud2, result.transform)
        tag = f"icp ({result.iterations} iterations, residual {result.final_residual:.6g} m"
        tag += ")" if result.converged else ", not converged)"
    else:
        if args.truth:
            pose1 = parse_pose(args.truth[0])
            pose2 = parse_pose(args.truth[1])
        else:
            pose1 = cloud1.sensor_pose
            pose2 = cloud2.sensor_pose
        registered, result = register_with_truth(cloud2, pose1, pose2)
        tag = "truth poses"
    session = build_session(
        cloud1, registered, result, grid=parse_grid(args.grid), min_points=args.min_points
    )
    save_session(session, args.out)
    stats = session.iterations[0].field.stats
    print(
        f"{args.out}: registered via {tag}; baseline field has "
        f"{stats.populated_voxels} voxels, max magnitude {stats.max_magnitude:.6g} m"
    )
    return 0


def cmd_field(args) -> int:
    session = load_session(args.session)
    if args.grid is not None:
        grid = parse_grid(args.grid).with_origin(session.origin1)
        c1, c2 = mitigated_clouds(session, len(session.iterations) - 1)
        field = compute_field(c1, c2, grid, min_points=session.min_points)
    else:
        field = session.iterations[-1].field
    from .field import field_to_dict

    text = cloudio.canonical_json_dumps(field_to_dict(field)) + "\n"
    with open(args.export, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(
        f"{args.export}: {field.stats.populated_voxels} voxels, "
        f"max magnitude {field.stats.max_magnitude:.6g} m"
    )
    return 0


def cmd_mitigate(args) -> int:
    session = load_session(args.session)
    for spec in args.add:
        mitigation = parse_mitigation(spec)
        record = run_iteration(session, mitigation, note=args.note)
        s = record.field.stats
        print(
            f"iteration {len(session.iterations) - 1}: +{mitigation.describe()} -> "
            f"max {s.max_magnitude:.6g} m over {s.populated_voxels} voxels"
        )
    save_session(session, args.session)
    return 0


def cmd_stats(args) -> int:
    session = load_session(args.session)
    for i, rec in enumerate(session.iterations):
        s = rec.field.stats
        names = ",".join(m.kind for m in rec.mitigations) or "baseline"
        print(
            f"iteration {i} [{names}]: voxels={s.populated_voxels} "
            f"max={s.max_magnitude:.6g} mean={s.mean_magnitude:.6g} "
            f"median={s.median_magnitude:.6g}"
        )
    return 0


def cmd_report(args) -> int:
    session = load_session(args.session)
    paths = report.write_report(
        session, args.out_dir, iteration=args.iteration, vector_scale=args.vector_scale
    )
    for p in paths:
        print(p)
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    session = load_session(args.session)
    print(f"serving session {args.session} on http://{args.host}:{args.port}")
    serve(session, host=args.host, port=args.port, session_path=args.session)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scandiff",
        description="Diagnose lidar scan-matching adversities with discrepancy-vector fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="ray cast a sensor model against a scene")
    p.add_argument("--scene", default="default", help="scene JSON file, or 'default'")
    p.add_argument("--pose", required=True, help="x,y,z,roll,pitch,yaw (angles in radians)")
    p.add_argument("--sensor", default="sim80", help="sensor preset (sim80, vlp16) or JSON file")
    p.add_argument("--out", required=True, help="output cloud (.ply or .csv)")
    p.add_argument("--label", default="", help="label stored with the cloud")
    p.add_argument("--seed", type=int, default=None, help="noise RNG seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("register", help="register two clouds and start a session")
    p.add_argument("--cloud1", required=True)
    p.add_argument("--cloud2", required=True)
    p.add_argument(
        "--truth",
        nargs=2,
        metavar=("POSE1", "POSE2"),
        default=None,
        help="capture poses x,y,z,roll,pitch,yaw; omit to use the poses stored in the files",
    )
    p.add_argument("--icp", action="store_true", help="estimate the transform with ICP instead")
    p.add_argument("--grid", default="sim", help="grid preset or az_bins,el_bins,el_min_deg,el_max_deg")
    p.add_argument("--min-points", type=int, default=1, help="per-cloud points required per voxel")
    p.add_argument("--out", required=True, help="session JSON path")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("field", help="export a field as canonical JSON")
    p.add_argument("--session", required=True)
    p.add_argument("--grid", default=None, help="override grid: preset or az,el,min_deg,max_deg")
    p.add_argument("--export", required=True, help="output JSON path")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("mitigate", help="run one iteration per added mitigation")
    p.add_argument("--session", required=True)
    p.add_argument(
        "--add",
        action="append",
        required=True,
        metavar="SPEC",
        help="ego:radius=3 | fov:el_min=-22,el_max=10 | shadow:margin=0.5 (repeatable)",
    )
    p.add_argument("--note", default="", help="free-text note stored on the iteration")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("stats", help="print per-iteration field statistics")
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render figures and CSV tables for a session")
    p.add_argument("--session", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--iteration", type=int, default=-1, help="iteration to plot (default last)")
    p.add_argument("--vector-scale", type=float, default=1.0, help="glyph stretch factor")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the analyst HTTP API for a session")
    p.add_argument("--session", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
