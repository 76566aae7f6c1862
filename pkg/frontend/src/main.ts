/**
 * Entry point: wire socket, model, renderer, HUD, and the input handlers.
 *
 * Keys: T toggles take_control. Dragging the yellow marker streams
 * user_target at up to 30 Hz; hold Shift while dragging to move vertically.
 * The bridge URL defaults to the serving host and can be overridden with
 * ?ws=ws://host:port/stream.
 */

import * as THREE from "three";
import { constrainVertical, dragPlane, intersectDragPlane,
         pointerToNdc } from "./drag.js";
import { Hud } from "./hud.js";
import { Renderer } from "./render.js";
import { applyBatch, emptyScene, resetForSnapshot } from "./sceneModel.js";
import { SocketClient, Throttle } from "./socket.js";

function bridgeUrl(): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override) return override;
  const host = location.hostname || "127.0.0.1";
  const port = location.port || "9001";
  return `ws://${host}:${port}/stream`;
}

const canvas = document.getElementById("view") as HTMLCanvasElement;
const renderer = new Renderer(canvas);
const hud = new Hud();
const model = emptyScene();

const socket = new SocketClient(bridgeUrl(), {
  onOpen: () => {
    // the server re-sends the full snapshot on every connection
    resetForSnapshot(model);
    model.connection = "open";
  },
  onClose: () => {
    model.connection = "closed";
  },
});

window.addEventListener("keydown", (ev) => {
  if (ev.key === "t" || ev.key === "T") {
    socket.send("take_control", { take: !model.controlOwned });
  }
});

// ---- marker dragging --------------------------------------------------------

const throttle = new Throttle(1000 / 30);
let dragging = false;
let plane: THREE.Plane | null = null;

function pointerNdc(ev: PointerEvent): THREE.Vector2 {
  return pointerToNdc(ev.clientX, ev.clientY, window.innerWidth,
                      window.innerHeight);
}

canvas.addEventListener("pointerdown", (ev) => {
  if (!model.controlOwned || !model.marker) return;
  const picker = new THREE.Raycaster();
  picker.setFromCamera(pointerNdc(ev), renderer.camera);
  if (picker.intersectObject(renderer.markerMesh).length === 0) return;
  dragging = true;
  plane = dragPlane(renderer.camera, renderer.markerMesh.position.clone());
  renderer.controls.enabled = false;
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (!dragging || !plane || !model.marker) return;
  const hit = intersectDragPlane(renderer.camera, pointerNdc(ev), plane);
  if (!hit) return;
  const marker = new THREE.Vector3(...model.marker);
  const next = ev.shiftKey ? constrainVertical(marker, hit) : hit;
  model.marker = [next.x, next.y, next.z];
  if (throttle.ready(performance.now())) {
    socket.send("user_target", { p: model.marker });
  }
});

function endDrag(ev: PointerEvent): void {
  if (!dragging) return;
  dragging = false;
  plane = null;
  renderer.controls.enabled = true;
  canvas.releasePointerCapture(ev.pointerId);
  if (model.marker) socket.send("user_target", { p: model.marker });
}
canvas.addEventListener("pointerup", endDrag);
canvas.addEventListener("pointercancel", endDrag);

// ---- frame loop ---------------------------------------------------------------

function frame(): void {
  applyBatch(model, socket.drain());
  renderer.update(model);
  hud.update(model);
  renderer.render();
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
