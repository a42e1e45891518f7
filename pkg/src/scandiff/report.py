"""Figure and table rendering for analysis sessions.

The report path turns one session into files: a top-down vector-field
figure, a perspective (3D) figure, a magnitude-history chart across
iterations, a per-voxel CSV of the chosen iteration's field, and a per-
iteration stats CSV. Figures are matplotlib, rendered off-screen.

Arrow glyphs start at the cloud-1 centroid of each voxel and span the
discrepancy vector; an optional scale factor stretches the glyphs without
touching the underlying numbers.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import DiscrepancyField  # noqa: E402
from .session import Session, mitigated_clouds  # noqa: E402


def _field_arrays(field: DiscrepancyField):
    tails = np.array([v.centroid1 for v in field.voxels]).reshape(-1, 3)
    vecs = np.array([v.vector for v in field.voxels]).reshape(-1, 3)
    mags = np.linalg.norm(vecs, axis=1) if len(vecs) else np.zeros(0)
    return tails, vecs, mags


def render_topdown(
    session: Session,
    iteration: int,
    path,
    vector_scale: float = 1.0,
    max_cloud_points: int = 4000,
) -> Path:
    """Bird's-eye quiver of the field over a decimated cloud-1 backdrop."""
    path = Path(path)
    record = session.iterations[iteration]
    tails, vecs, mags = _field_arrays(record.field)
    c1, _ = mitigated_clouds(session, iteration)

    fig, ax = plt.subplots(figsize=(8, 8))
    if len(c1):
        stride = max(1, len(c1) // max_cloud_points)
        pts = c1.points[::stride]
        ax.scatter(pts[:, 0], pts[:, 1], s=1, c="0.75", linewidths=0, zorder=1)
    if len(tails):
        q = ax.quiver(
            tails[:, 0],
            tails[:, 1],
            vecs[:, 0] * vector_scale,
            vecs[:, 1] * vector_scale,
            mags,
            angles="xy",
            scale_units="xy",
            scale=1.0,
            cmap="viridis",
            width=0.004,
            zorder=2,
        )
        fig.colorbar(q, ax=ax, label="discrepancy magnitude [m]", shrink=0.8)
    ax.plot(*session.origin1[:2], marker="*", color="red", markersize=12)
    ax.plot(*session.origin2[:2], marker="*", color="darkorange", markersize=12)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    stats = record.field.stats
    ax.set_title(
        f"iteration {iteration}: top-down discrepancy field "
        f"(max {stats.max_magnitude:.3g} m, {stats.populated_voxels} voxels)"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_perspective(
    session: Session,
    iteration: int,
    path,
    vector_scale: float = 1.0,
    max_cloud_points: int = 3000,
) -> Path:
    """3D view of the field glyphs over the mitigated cloud pair."""
    path = Path(path)
    record = session.iterations[iteration]
    tails, vecs, mags = _field_arrays(record.field)
    c1, c2 = mitigated_clouds(session, iteration)

    fig = plt.figure(figsize=(9, 7))
    ax = fig.add_subplot(projection="3d")
    for cloud, color in ((c1, "0.8"), (c2, "0.6")):
        if len(cloud):
            stride = max(1, len(cloud) // max_cloud_points)
            pts = cloud.points[::stride]
            ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=0.5, c=color, linewidths=0)
    if len(tails):
        # color arrows individually; mpl 3D quiver takes a flat color list
        norm = plt.Normalize(vmin=0.0, vmax=max(float(mags.max()), 1e-12))
        colors = plt.get_cmap("viridis")(norm(mags))
        ax.quiver(
            tails[:, 0],
            tails[:, 1],
            tails[:, 2],
            vecs[:, 0] * vector_scale,
            vecs[:, 1] * vector_scale,
            vecs[:, 2] * vector_scale,
            colors=colors,
            arrow_length_ratio=0.25,
            linewidth=1.2,
        )
        mappable = plt.cm.ScalarMappable(norm=norm, cmap="viridis")
        fig.colorbar(mappable, ax=ax, label="discrepancy magnitude [m]", shrink=0.6)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.set_title(f"iteration {iteration}: perspective discrepancy field")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_history(session: Session, path) -> Path:
    """Per-iteration magnitude statistics as a line chart."""
    path = Path(path)
    iters = np.arange(len(session.iterations))
    stats = [rec.field.stats for rec in session.iterations]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(iters, [s.max_magnitude for s in stats], marker="o", label="max")
    ax.plot(iters, [s.mean_magnitude for s in stats], marker="s", label="mean")
    ax.plot(iters, [s.median_magnitude for s in stats], marker="^", label="median")
    ax.set_xticks(iters)
    labels = ["baseline"]
    for rec in session.iterations[1:]:
        labels.append("+" + rec.mitigations[-1].kind if rec.mitigations else "pass")
    ax.set_xticklabels(labels[: len(iters)], rotation=20, ha="right")
    ax.set_ylabel("discrepancy magnitude [m]")
    ax.set_title("mitigation history")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def write_field_csv(field: DiscrepancyField, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "azimuth_index",
                "elevation_index",
                "centroid1_x",
                "centroid1_y",
                "centroid1_z",
                "centroid2_x",
                "centroid2_y",
                "centroid2_z",
                "u",
                "v",
                "w",
                "magnitude",
                "count1",
                "count2",
            ]
        )
        for vox in field.voxels:
            writer.writerow(
                [vox.key.azimuth_index, vox.key.elevation_index]
                + [format(x, ".9g") for x in vox.centroid1]
                + [format(x, ".9g") for x in vox.centroid2]
                + [format(x, ".9g") for x in vox.vector]
                + [format(vox.magnitude, ".9g"), vox.count1, vox.count2]
            )
    return path


def write_history_csv(session: Session, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "mitigations", "populated_voxels", "max_magnitude", "mean_magnitude", "median_magnitude"]
        )
        for i, rec in enumerate(session.iterations):
            s = rec.field.stats
            writer.writerow(
                [
                    i,
                    ";".join(m.kind for m in rec.mitigations),
                    s.populated_voxels,
                    format(s.max_magnitude, ".9g"),
                    format(s.mean_magnitude, ".9g"),
                    format(s.median_magnitude, ".9g"),
                ]
            )
    return path


def write_report(
    session: Session, out_dir, iteration: int = -1, vector_scale: float = 1.0
) -> List[Path]:
    """Render the full report bundle into a directory; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if iteration < 0:
        iteration = len(session.iterations) + iteration
    if not 0 <= iteration < len(session.iterations):
        raise ValueError(f"iteration {iteration} out of range")
    record = session.iterations[iteration]
    return [
        render_topdown(session, iteration, out_dir / f"field_topdown_iter{iteration}.png", vector_scale),
        render_perspective(session, iteration, out_dir / f"field_perspective_iter{iteration}.png", vector_scale),
        render_history(session, out_dir / "history.png"),
        write_field_csv(record.field, out_dir / f"field_iter{iteration}.csv"),
        write_history_csv(session, out_dir / "history.csv"),
    ]
