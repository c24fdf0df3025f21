"""Operator commands tying the pipeline together.

Every command reads and writes one scene file; there is no hidden state.
A typical session:

    avescene build  --osm block.json --terrain dtm.asc --anchor auto --scene s.json
    avescene ingest shots/*.jpg --sidecar shots/meta --scene s.json
    avescene project --scene s.json
    avescene place   --detections dets.json --scene s.json
    avescene export  --scene s.json --obj out/scene.obj
    avescene report  --scene s.json --out-dir out/report
    avescene serve   --scene s.json
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import scene as scenemod
from .config import Config, load_config
from .detection import parse_detections
from .errors import AveSceneError, MissingGeotag, NoExif
from .geodesy import GeoCoord, make_frame
from .ingest import (
    apply_sidecar,
    jpeg_dimensions,
    load_sidecar,
    parse_exif,
    parse_overpass,
    parse_terrain,
    sidecar_path_for,
)
from .ingest.terrain import sample_elevation
from .protocol import SceneOwner, ServerCore
from .scene import (
    AddDetections,
    AddImage,
    RebuildGeometry,
    SceneState,
    SetFrame,
    SetProjectorPose,
    apply,
    images_by_id,
    load,
    save,
)


@click.group()
@click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
    default=None, help="JSON config file (see avescene.config).",
)
@click.pass_context
def main(ctx, config_path):
    """Build and serve photo-textured 3D scenes from open geodata."""
    try:
        ctx.obj = load_config(config_path)
    except AveSceneError as exc:
        raise click.ClickException(str(exc))


def _load_scene(path: str, cfg: Config, must_exist: bool = False) -> SceneState:
    p = Path(path)
    if p.exists():
        return load(p.read_bytes())
    if must_exist:
        raise click.ClickException(f"scene file {path} does not exist")
    return SceneState(settings=cfg.settings())


def _write_scene(path: str, scene: SceneState) -> None:
    Path(path).write_bytes(save(scene))


@main.command()
@click.argument("images", nargs=-1, required=True, type=click.Path())
@click.option("--sidecar", "sidecar_dir", type=click.Path(file_okay=False), default=None,
              help="Directory of per-image sidecar JSON files (default: next to each image).")
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.pass_obj
def ingest(cfg: Config, images, sidecar_dir, scene_path):
    """Add geotagged photos; each becomes a projector seeded at its geotag."""
    scene = _load_scene(scene_path, cfg)
    failures = []
    for image_path in images:
        image_id = Path(image_path).stem
        try:
            data = Path(image_path).read_bytes()
            record = None
            try:
                record = parse_exif(data, image_id=image_id, source_path=str(image_path))
            except (NoExif, MissingGeotag):
                record = None  # a sidecar may still supply the location

            sc_path = sidecar_path_for(image_path, sidecar_dir)
            overrides = load_sidecar(sc_path) if sc_path.is_file() else {}
            if record is None or overrides:
                width, height = jpeg_dimensions(data)
                record = apply_sidecar(
                    record, overrides, image_id, str(image_path), width=width, height=height
                )
            scene = apply(scene, AddImage(record))
            click.echo(f"ingested {image_id} ({record.geo.lat:.6f}, {record.geo.lon:.6f})")
        except (AveSceneError, OSError) as exc:
            failures.append((image_path, exc))
    _write_scene(scene_path, scene)
    if failures:
        for image_path, exc in failures:
            click.echo(f"FAILED {image_path}: {exc}", err=True)
        sys.exit(2)


@main.command()
@click.option("--osm", "osm_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Overpass response file (geometry-expanded JSON).")
@click.option("--bbox", default=None, help="S,W,N,E bounding box for a live Overpass query.")
@click.option("--terrain", "terrain_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="ESRI ASCII grid elevation file.")
@click.option("--anchor", default="auto",
              help="'auto' (footprint centroid) or explicit 'lat,lon'.")
@click.option("--base-elevation", type=float, default=None,
              help="Frame base elevation in meters (default: terrain sample at the anchor, else 0).")
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.pass_obj
def build(cfg: Config, osm_path, bbox, terrain_path, anchor, base_elevation, scene_path):
    """Build building and terrain meshes into the scene."""
    if (osm_path is None) == (bbox is None):
        raise click.ClickException("exactly one of --osm or --bbox is required")

    if osm_path is not None:
        body = Path(osm_path).read_text()
    else:
        from .ingest import fetch_overpass

        try:
            parts = [float(v) for v in bbox.split(",")]
            if len(parts) != 4:
                raise ValueError("need 4 comma-separated values")
        except ValueError as exc:
            raise click.ClickException(f"bad --bbox {bbox!r}: {exc}")
        try:
            body = fetch_overpass(tuple(parts), url=cfg.overpass_url, timeout=cfg.overpass_timeout)
        except Exception as exc:
            raise click.ClickException(f"Overpass query failed: {exc}")

    try:
        footprints = parse_overpass(body)
        grid = parse_terrain(Path(terrain_path).read_text()) if terrain_path else None

        if anchor == "auto":
            if not footprints:
                raise click.ClickException("--anchor auto needs at least one footprint")
            lats = [g.lat for fp in footprints for g in fp.ring]
            lons = [g.lon for fp in footprints for g in fp.ring]
            anchor_geo = GeoCoord(lat=sum(lats) / len(lats), lon=sum(lons) / len(lons))
        else:
            try:
                lat, lon = (float(v) for v in anchor.split(","))
            except ValueError:
                raise click.ClickException(f"bad --anchor {anchor!r}: use 'auto' or 'lat,lon'")
            anchor_geo = GeoCoord(lat=lat, lon=lon)

        if base_elevation is None:
            base_elevation = 0.0
            if grid is not None:
                from .geodesy import latlon_to_utm

                try:
                    if grid.geographic:
                        base_elevation = sample_elevation(grid, anchor_geo.lon, anchor_geo.lat)
                    else:
                        utm = latlon_to_utm(anchor_geo)
                        base_elevation = sample_elevation(grid, utm.easting, utm.northing)
                except AveSceneError:
                    pass  # anchor outside the grid; keep 0

        scene = _load_scene(scene_path, cfg)
        scene = apply(scene, SetFrame(make_frame(anchor_geo, base_elevation=base_elevation)))
        scene = apply(scene, RebuildGeometry(footprints=tuple(footprints), terrain=grid))
    except AveSceneError as exc:
        raise click.ClickException(str(exc))

    _write_scene(scene_path, scene)
    n_surfaces = len(scenemod.all_surfaces(scene))
    click.echo(
        f"built {len(scene.buildings)} buildings"
        + (", terrain" if scene.terrain else "")
        + f"; {n_surfaces} surfaces; anchor ({anchor_geo.lat:.6f}, {anchor_geo.lon:.6f})"
    )


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.pass_obj
def project(cfg: Config, scene_path):
    """Recompute projector visibility masks and the layer pool."""
    scene = _load_scene(scene_path, cfg, must_exist=True)
    if scene.projectors:
        # re-asserting a pose is the declared recompute trigger (revision advances)
        first = scene.projectors[0]
        scene = apply(scene, SetProjectorPose(first.projector_id, first.pose))
        _write_scene(scene_path, scene)
    textured = sum(1 for bits in scene.mask_table.bitsets.values() if bits)
    click.echo(
        f"mask table: {len(scene.mask_table.bitsets)} surfaces, "
        f"{textured} textured, pool size {len(scene.mask_table.pool)}"
    )


@main.command(name="place")
@click.option("--detections", "det_path", required=True, type=click.Path(exists=True))
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.pass_obj
def place_cmd(cfg: Config, det_path, scene_path):
    """Anchor externally detected objects into the scene."""
    scene = _load_scene(scene_path, cfg, must_exist=True)
    try:
        detections = parse_detections(Path(det_path).read_text(), images_by_id(scene))
        before = len(scene.placements)
        scene = apply(scene, AddDetections(tuple(detections)))
    except AveSceneError as exc:
        raise click.ClickException(str(exc))
    placed = len(scene.placements) - before
    _write_scene(scene_path, scene)
    click.echo(f"placed {placed} of {len(detections)} detections; "
               f"{len(scene.trajectories)} trajectories")
    if placed < len(detections):
        click.echo(f"warning: {len(detections) - placed} detections unplaceable", err=True)


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--obj", "obj_path", required=True, type=click.Path())
@click.option("--mtl", "mtl_path", default=None, type=click.Path(),
              help="Material file path (default: alongside the OBJ).")
@click.pass_obj
def export(cfg: Config, scene_path, obj_path, mtl_path):
    """Write the scene as OBJ + MTL for standard 3D tools."""
    scene = _load_scene(scene_path, cfg, must_exist=True)
    obj_file = Path(obj_path)
    mtl_file = Path(mtl_path) if mtl_path else obj_file.with_suffix(".mtl")
    obj_text, mtl_text = scenemod.export_obj(scene, mtl_name=mtl_file.name)
    obj_file.parent.mkdir(parents=True, exist_ok=True)
    obj_file.write_text(obj_text)
    mtl_file.write_text(mtl_text)
    click.echo(f"wrote {obj_file} and {mtl_file}")


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", "out_dir", required=True, type=click.Path(file_okay=False))
@click.pass_obj
def report(cfg: Config, scene_path, out_dir):
    """Render overview figures and CSV summaries of the scene."""
    from .report import write_report

    scene = _load_scene(scene_path, cfg, must_exist=True)
    written = write_report(scene, out_dir)
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--host", default=None, help="Bind address (default from config).")
@click.option("--udp-port", type=int, default=None)
@click.option("--ws-port", type=int, default=None)
@click.option("--assets", "assets_dir", type=click.Path(file_okay=False), default=None,
              help="Static viewer assets directory (default from config).")
@click.pass_obj
def serve(cfg: Config, scene_path, host, udp_port, ws_port, assets_dir):
    """Serve the scene over UDP and the websocket bridge until interrupted.

    Committed mutations persist back into the scene file."""
    from .server import run_server

    scene = _load_scene(scene_path, cfg, must_exist=True)
    owner = SceneOwner(scene, persist_path=scene_path)
    core = ServerCore(owner)
    assets = assets_dir or cfg.assets_dir
    run_server(
        core,
        host=host or cfg.host,
        udp_port=cfg.udp_port if udp_port is None else udp_port,
        ws_port=cfg.ws_port if ws_port is None else ws_port,
        assets_dir=Path(assets) if assets else None,
    )


if __name__ == "__main__":
    main()
