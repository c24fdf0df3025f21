"""Scene reports: overview figures plus delimited summaries.

Writes a top-down scene map and a mask-pool chart as PNG, and three CSV
files (surfaces, projectors, placements) an operator can pull into a
spreadsheet. Everything is derived from the scene value alone, so the
output is reproducible byte-for-byte given the same scene file.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .detection import GROUND_SURFACE_ID
from .jsonio import format_timestamp
from .meshgen import KIND_ROOF, surface_area
from .projection import texture_assignment
from .scene import SceneState, all_surfaces


def write_report(scene: SceneState, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        _scene_map(scene, out_dir / "scene_map.png"),
        _pool_chart(scene, out_dir / "mask_pools.png"),
        _surfaces_csv(scene, out_dir / "surfaces.csv"),
        _projectors_csv(scene, out_dir / "projectors.csv"),
        _placements_csv(scene, out_dir / "placements.csv"),
    ]
    return written


def _scene_map(scene: SceneState, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 8))
    ax.set_title("scene overview (local ENU, meters)")
    ax.set_xlabel("x east [m]")
    ax.set_ylabel("y north [m]")
    ax.set_aspect("equal")
    ax.grid(True, linewidth=0.3, alpha=0.5)

    for mesh in scene.buildings:
        roof = next((s for s in mesh.surfaces if s.kind == KIND_ROOF), None)
        if roof is None:
            continue
        xs = [v.x for v in roof.vertices] + [roof.vertices[0].x]
        ys = [v.y for v in roof.vertices] + [roof.vertices[0].y]
        ax.fill(xs, ys, color="#c9b79c", alpha=0.7, edgecolor="#7a6a50", linewidth=1.0)
        cx = sum(xs[:-1]) / (len(xs) - 1)
        cy = sum(ys[:-1]) / (len(ys) - 1)
        if mesh.building_id is not None:
            ax.annotate(str(mesh.building_id), (cx, cy), fontsize=7, ha="center", color="#4a3f2f")

    if scene.terrain is not None:
        vs = scene.terrain.surfaces[0].vertices
        ax.scatter([v.x for v in vs], [v.y for v in vs], s=2, c=[v.z for v in vs],
                   cmap="terrain", alpha=0.6, zorder=0)

    for proj in scene.projectors:
        p = proj.pose.position
        yaw = math.radians(proj.pose.yaw)
        dx, dy = math.sin(yaw), math.cos(yaw)  # clockwise from north
        ax.plot(p.x, p.y, marker="^", color="tab:blue", markersize=7)
        ax.annotate(
            f"proj {proj.projector_id}", (p.x, p.y), textcoords="offset points",
            xytext=(5, 5), fontsize=7, color="tab:blue",
        )
        half = math.radians(proj.intrinsics.hfov) / 2
        for a in (-half, half):
            ex = math.sin(yaw + a) * 8
            ey = math.cos(yaw + a) * 8
            ax.plot([p.x, p.x + ex], [p.y, p.y + ey], color="tab:blue", linewidth=0.6, alpha=0.7)
        ax.plot([p.x, p.x + dx * 10], [p.y, p.y + dy * 10], color="tab:blue", linewidth=0.9)

    by_id = {pl.placement_id: pl for pl in scene.placements}
    for pl in scene.placements:
        ax.plot(pl.position.x, pl.position.y, marker="x", color="tab:red", markersize=6)
        label = pl.detection.identity or pl.detection.class_label
        ax.annotate(label, (pl.position.x, pl.position.y), textcoords="offset points",
                    xytext=(4, -8), fontsize=6, color="tab:red")
    for tr in scene.trajectories:
        pts = [by_id[pid].position for pid in tr.points if pid in by_id]
        if len(pts) > 1:
            ax.plot([q.x for q in pts], [q.y for q in pts], "--", color="tab:green",
                    linewidth=1.2, alpha=0.9)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _pool_chart(scene: SceneState, path: Path) -> Path:
    counts: dict[int, int] = {}
    for bits in scene.mask_table.bitsets.values():
        pid = scene.mask_table.pool[bits]
        counts[pid] = counts.get(pid, 0) + 1
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if counts:
        pool_ids = sorted(counts)
        ax.bar([str(p) for p in pool_ids], [counts[p] for p in pool_ids], color="#6b8ba4")
    ax.set_title("surfaces per projector-mask pool")
    ax.set_xlabel("pool id")
    ax.set_ylabel("surfaces")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _surfaces_csv(scene: SceneState, path: Path) -> Path:
    assignment = texture_assignment(scene.mask_table, scene.projectors)
    building_of = {}
    for mesh in scene.buildings:
        for s in mesh.surfaces:
            building_of[s.surface_id] = mesh.building_id
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["surface_id", "kind", "building_id", "triangles", "area_m2", "bitset_hex",
             "pool_id", "texture_projector"]
        )
        for s in sorted(all_surfaces(scene), key=lambda s: s.surface_id):
            bits = scene.mask_table.bitsets.get(s.surface_id, 0)
            w.writerow([
                s.surface_id,
                s.kind,
                building_of.get(s.surface_id, ""),
                len(s.triangles),
                f"{surface_area(s):.6f}",
                format(bits, "x"),
                scene.mask_table.pool.get(bits, ""),
                assignment.get(s.surface_id, ""),
            ])
    return path


def _projectors_csv(scene: SceneState, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["projector_id", "image_id", "x", "y", "z", "yaw", "pitch", "roll",
             "hfov", "aspect", "priority_timestamp"]
        )
        for p in scene.projectors:
            w.writerow([
                p.projector_id, p.image_id,
                f"{p.pose.position.x:.6f}", f"{p.pose.position.y:.6f}",
                f"{p.pose.position.z:.6f}",
                f"{p.pose.yaw:.6f}", f"{p.pose.pitch:.6f}", f"{p.pose.roll:.6f}",
                f"{p.intrinsics.hfov:.6f}", f"{p.intrinsics.aspect:.6f}",
                "" if p.priority_timestamp is None else format_timestamp(p.priority_timestamp),
            ])
    return path


def _placements_csv(scene: SceneState, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["placement_id", "identity", "class_label", "confidence", "image_id",
             "x", "y", "z", "anchored_on", "timestamp"]
        )
        for pl in scene.placements:
            w.writerow([
                pl.placement_id,
                pl.detection.identity or "",
                pl.detection.class_label,
                pl.detection.confidence,
                pl.detection.image_id,
                f"{pl.position.x:.6f}", f"{pl.position.y:.6f}", f"{pl.position.z:.6f}",
                "ground" if pl.anchored_on == GROUND_SURFACE_ID else pl.anchored_on,
                "" if pl.timestamp is None else format_timestamp(pl.timestamp),
            ])
    return path
