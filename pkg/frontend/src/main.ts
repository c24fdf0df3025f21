// Browser entry: connect to the engine's websocket bridge, mirror the
// scene, render it, and drive the calibration panel.

import { CalibrationControl } from "./calibrate.js";
import { ViewerConnection, ViewerSession } from "./connection.js";
import { orderImages } from "./imagePanel.js";
import { SceneRenderer } from "./render.js";
import type { Pose, SceneSnapshot } from "./protocol.js";

const params = new URLSearchParams(window.location.search);
const wsUrl =
  params.get("server") ??
  `ws://${window.location.hostname}:${window.location.port || 47702}/ws`;
const httpBase = wsUrl.replace(/^ws/, "http").replace(/\/ws$/, "");

const canvas = document.getElementById("view") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const imagesEl = document.getElementById("images")!;
const calibrateEl = document.getElementById("calibrate")!;
const ghostEl = document.getElementById("ghost") as HTMLImageElement;
const ghostOpacityEl = document.getElementById("ghost-opacity") as HTMLInputElement;

const renderer = new SceneRenderer(canvas);
const socket = new WebSocket(wsUrl);
const connection = new ViewerConnection({
  send: (d) => socket.send(d),
  close: () => socket.close(),
  addEventListener: (type, fn) =>
    socket.addEventListener(type, fn as unknown as EventListener),
});
const session = new ViewerSession(connection);

let control: CalibrationControl | null = null;

function setStatus(text: string): void {
  statusEl.textContent = text;
}

session.onSceneUpdated = (scene) => {
  if (control !== null) {
    const proj = scene.projectors.find((p) => p.projector_id === control!.projectorId);
    if (proj) control.rebase(proj.pose);
  }
  renderer.update(scene, httpBase);
  rebuildImagePanel(scene);
  rebuildCalibratePanel(scene);
  setStatus(`revision ${scene.revision} | ${renderer.objectCount} objects`);
};

function rebuildImagePanel(scene: SceneSnapshot): void {
  imagesEl.innerHTML = "";
  for (const entry of orderImages(scene.images, scene.projectors)) {
    const li = document.createElement("li");
    li.textContent = `${entry.imageId} ${entry.undated ? "(no timestamp)" : entry.timestamp}`;
    if (entry.undated) li.classList.add("undated");
    li.addEventListener("click", () => {
      if (entry.projectorId !== null && session.mirror.scene) {
        renderer.flyToProjector(session.mirror.scene, entry.projectorId);
        selectProjector(entry.projectorId);
      }
    });
    imagesEl.appendChild(li);
  }
}

function selectProjector(projectorId: number): void {
  const scene = session.mirror.scene;
  if (!scene) return;
  const proj = scene.projectors.find((p) => p.projector_id === projectorId);
  if (!proj) return;
  session.selectedProjector = projectorId;
  control = new CalibrationControl(projectorId, proj.pose);
  ghostEl.src = `${httpBase}/images/${encodeURIComponent(proj.image_id)}`;
  ghostEl.style.display = "block";
  rebuildCalibratePanel(scene);
}

function rebuildCalibratePanel(scene: SceneSnapshot): void {
  calibrateEl.innerHTML = "";
  const select = document.createElement("select");
  for (const proj of scene.projectors) {
    const opt = document.createElement("option");
    opt.value = String(proj.projector_id);
    opt.textContent = `projector ${proj.projector_id} (${proj.image_id})`;
    opt.selected = session.selectedProjector === proj.projector_id;
    select.appendChild(opt);
  }
  select.addEventListener("change", () => selectProjector(Number(select.value)));
  calibrateEl.appendChild(select);
  if (control === null) return;

  const pose = control.displayed;
  const rows: Array<[keyof Pose & ("yaw" | "pitch" | "roll"), number, number]> = [
    ["yaw", -180, 180],
    ["pitch", -90, 90],
    ["roll", -90, 90],
  ];
  for (const [field, min, max] of rows) {
    const label = document.createElement("label");
    label.textContent = field;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = String(min);
    slider.max = String(max);
    slider.step = "0.1";
    slider.value = String(pose[field]);
    slider.addEventListener("pointerdown", () => control!.beginDrag());
    slider.addEventListener("input", () => {
      control!.updatePreview({ [field]: Number(slider.value) });
      applyPreview();
    });
    slider.addEventListener("change", () => void commitPose());
    label.appendChild(slider);
    calibrateEl.appendChild(label);
  }
  for (const [axis, idx] of [["x", 0], ["y", 1], ["z", 2]] as const) {
    const label = document.createElement("label");
    label.textContent = axis;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "0.5";
    input.value = pose.position[idx].toFixed(2);
    input.addEventListener("change", () => {
      const next = [...control!.displayed.position] as [number, number, number];
      next[idx] = Number(input.value);
      control!.updatePreview({ position: next });
      applyPreview();
      void commitPose();
    });
    label.appendChild(input);
    calibrateEl.appendChild(label);
  }
}

function applyPreview(): void {
  const scene = session.mirror.scene;
  if (!scene || control === null) return;
  renderer.previewPoses.set(control.projectorId, control.displayed);
  renderer.update(scene, httpBase); // live projection feedback during the drag
}

async function commitPose(): Promise<void> {
  if (control === null) return;
  try {
    const revision = await control.commit(session);
    if (revision !== null) setStatus(`pose committed at revision ${revision}`);
  } catch (err) {
    setStatus(`pose rejected: ${(err as Error).message}`);
  } finally {
    renderer.previewPoses.delete(control.projectorId);
    if (session.mirror.scene) renderer.update(session.mirror.scene, httpBase);
  }
}

ghostOpacityEl.addEventListener("input", () => {
  ghostEl.style.opacity = ghostOpacityEl.value;
});

socket.addEventListener("open", async () => {
  setStatus("connected; loading scene");
  try {
    await session.connect();
  } catch (err) {
    setStatus(`connect failed: ${(err as Error).message}`);
  }
});
socket.addEventListener("close", () => setStatus("disconnected"));

function frame(): void {
  const w = canvas.clientWidth || canvas.parentElement!.clientWidth;
  const h = canvas.clientHeight || canvas.parentElement!.clientHeight;
  renderer.resize(w, h);
  renderer.render();
  requestAnimationFrame(frame);
}
frame();
