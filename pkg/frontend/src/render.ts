// three.js scene construction from a snapshot. World coordinates are kept
// exactly as the engine emits them (x east, y north, z up); the camera's
// up vector is +z so no axis juggling is needed anywhere.

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { projectUvUnclamped } from "./projection.js";
import {
  MeshRecord,
  ProjectorRecord,
  SceneSnapshot,
  SurfaceRecord,
  textureAssignment,
} from "./protocol.js";

const KIND_COLORS: Record<string, number> = {
  wall: 0xcfc4ae,
  roof: 0xa58d6f,
  ground: 0x8fa98f,
};

export class SceneRenderer {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly controls: OrbitControls;
  private renderer: THREE.WebGLRenderer;
  private sceneGroup = new THREE.Group();
  private textures = new Map<number, THREE.Texture>();
  private loader = new THREE.TextureLoader();
  /** preview poses (projector id -> pose) overriding the snapshot during drags */
  previewPoses = new Map<number, ProjectorRecord["pose"]>();
  private lastSnapshot: SceneSnapshot | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(55, 16 / 9, 0.1, 5000);
    this.camera.up.set(0, 0, 1);
    this.camera.position.set(60, -80, 55);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(0, 20, 0);

    this.scene.background = new THREE.Color(0x1c2026);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.75));
    const sun = new THREE.DirectionalLight(0xffffff, 1.1);
    sun.position.set(80, -40, 120);
    this.scene.add(sun);
    const grid = new THREE.GridHelper(400, 40, 0x3b4252, 0x2b313b);
    grid.rotation.x = Math.PI / 2; // grid lies in the x-y (ground) plane
    this.scene.add(grid);
    this.scene.add(new THREE.AxesHelper(12));
    this.scene.add(this.sceneGroup);
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  render(): void {
    this.controls.update();
    this.renderer.render(this.scene, this.camera);
  }

  flyToProjector(snapshot: SceneSnapshot, projectorId: number): void {
    const proj = snapshot.projectors.find((p) => p.projector_id === projectorId);
    if (!proj) return;
    const [x, y, z] = proj.pose.position;
    this.camera.position.set(x, y - 12, z + 8);
    this.controls.target.set(x, y + 10, z);
  }

  /** Rebuild all scene objects from a snapshot (cheap at street scale). */
  update(snapshot: SceneSnapshot, serverBase: string): void {
    this.lastSnapshot = snapshot;
    this.sceneGroup.clear();
    const assignment = textureAssignment(snapshot.mask_table, snapshot.projectors);
    const projectors = new Map(snapshot.projectors.map((p) => [p.projector_id, p]));

    const meshes: MeshRecord[] = [...snapshot.buildings];
    if (snapshot.terrain) meshes.push(snapshot.terrain);
    for (const mesh of meshes) {
      for (const surface of mesh.surfaces) {
        const pid = assignment.get(surface.surface_id);
        const proj = pid !== undefined ? projectors.get(pid) : undefined;
        this.sceneGroup.add(this.buildSurface(surface, proj, serverBase));
      }
    }
    this.addProjectorMarkers(snapshot);
    this.addPlacements(snapshot);
    this.addTrajectories(snapshot);
  }

  private buildSurface(
    surface: SurfaceRecord,
    proj: ProjectorRecord | undefined,
    serverBase: string,
  ): THREE.Mesh {
    const positions: number[] = [];
    const uvs: number[] = [];
    const pose = proj ? this.previewPoses.get(proj.projector_id) ?? proj.pose : null;
    for (const [i, j, k] of surface.triangles) {
      for (const idx of [i, j, k]) {
        const v = surface.vertices[idx];
        positions.push(v[0], v[1], v[2]);
        if (proj && pose) {
          const { u, v: tv } = projectUvUnclamped(pose, proj.intrinsics, v);
          uvs.push(Math.min(Math.max(u, 0), 1), 1 - Math.min(Math.max(tv, 0), 1));
        }
      }
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.Float32BufferAttribute(positions, 3));
    let material: THREE.Material;
    if (proj) {
      geometry.setAttribute("uv", new THREE.Float32BufferAttribute(uvs, 2));
      material = new THREE.MeshLambertMaterial({
        map: this.textureFor(proj, serverBase),
        side: THREE.FrontSide,
      });
    } else {
      material = new THREE.MeshLambertMaterial({
        color: KIND_COLORS[surface.kind] ?? 0x999999,
        side: THREE.FrontSide,
      });
    }
    geometry.computeVertexNormals();
    const mesh = new THREE.Mesh(geometry, material);
    mesh.name = `surface_${surface.surface_id}`;
    return mesh;
  }

  private textureFor(proj: ProjectorRecord, serverBase: string): THREE.Texture {
    let tex = this.textures.get(proj.projector_id);
    if (!tex) {
      tex = this.loader.load(`${serverBase}/images/${encodeURIComponent(proj.image_id)}`);
      tex.colorSpace = THREE.SRGBColorSpace;
      this.textures.set(proj.projector_id, tex);
    }
    return tex;
  }

  private addProjectorMarkers(snapshot: SceneSnapshot): void {
    for (const proj of snapshot.projectors) {
      const pose = this.previewPoses.get(proj.projector_id) ?? proj.pose;
      const marker = new THREE.Group();
      const cone = new THREE.Mesh(
        new THREE.ConeGeometry(0.5, 1.4, 12),
        new THREE.MeshBasicMaterial({ color: 0x4f9fe8 }),
      );
      cone.rotation.x = Math.PI / 2; // point along +y before yaw/pitch
      marker.add(cone);
      marker.position.set(...pose.position);
      marker.rotation.z = (-pose.yaw * Math.PI) / 180;
      marker.name = `projector_${proj.projector_id}`;
      this.sceneGroup.add(marker);
    }
  }

  private addPlacements(snapshot: SceneSnapshot): void {
    for (const pl of snapshot.placements) {
      const sprite = makeLabelSprite(pl.detection.identity ?? pl.detection.class_label);
      sprite.position.set(pl.position[0], pl.position[1], pl.position[2] + 1.2);
      this.sceneGroup.add(sprite);
      const post = new THREE.Mesh(
        new THREE.CylinderGeometry(0.08, 0.08, 1.8),
        new THREE.MeshBasicMaterial({ color: 0xe87a4f }),
      );
      post.rotation.x = Math.PI / 2;
      post.position.set(pl.position[0], pl.position[1], pl.position[2] + 0.9);
      this.sceneGroup.add(post);
    }
  }

  private addTrajectories(snapshot: SceneSnapshot): void {
    const byId = new Map(snapshot.placements.map((p) => [p.placement_id, p]));
    for (const tr of snapshot.trajectories) {
      const points = tr.points
        .map((pid) => byId.get(pid))
        .filter((p): p is NonNullable<typeof p> => p !== undefined)
        .map((p) => new THREE.Vector3(p.position[0], p.position[1], p.position[2] + 0.3));
      if (points.length < 2) continue;
      const geometry = new THREE.BufferGeometry().setFromPoints(points);
      const line = new THREE.Line(
        geometry,
        new THREE.LineBasicMaterial({ color: 0x6fe85f }),
      );
      line.name = `trajectory_${tr.identity}`;
      this.sceneGroup.add(line);
      const label = makeLabelSprite(tr.identity);
      label.position.copy(points[points.length - 1]).add(new THREE.Vector3(0, 0, 1.2));
      this.sceneGroup.add(label);
    }
  }

  get objectCount(): number {
    return this.sceneGroup.children.length;
  }
}

function makeLabelSprite(text: string): THREE.Sprite {
  const canvas = document.createElement("canvas");
  canvas.width = 256;
  canvas.height = 64;
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "rgba(10, 12, 16, 0.65)";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.font = "28px system-ui, sans-serif";
  ctx.fillStyle = "#f0f4f8";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(text, canvas.width / 2, canvas.height / 2);
  const texture = new THREE.CanvasTexture(canvas);
  const sprite = new THREE.Sprite(new THREE.SpriteMaterial({ map: texture }));
  sprite.scale.set(6, 1.5, 1);
  return sprite;
}
