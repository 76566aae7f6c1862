/**
 * Marker drag math. The marker moves on a camera-facing plane through its
 * current position; holding the vertical modifier keeps x/y fixed and takes
 * only the altitude from the hit point. Pure three.js math, no DOM.
 */

import { Camera, Plane, Raycaster, Vector2, Vector3 } from "three";

export function pointerToNdc(x: number, y: number, width: number,
                             height: number): Vector2 {
  return new Vector2((x / width) * 2 - 1, -(y / height) * 2 + 1);
}

/** Plane through `point` facing the camera (normal along the view axis). */
export function dragPlane(camera: Camera, point: Vector3): Plane {
  const normal = new Vector3();
  camera.getWorldDirection(normal);
  return new Plane().setFromNormalAndCoplanarPoint(normal, point);
}

export function intersectDragPlane(camera: Camera, ndc: Vector2,
                                   plane: Plane): Vector3 | null {
  const ray = new Raycaster();
  ray.setFromCamera(ndc, camera);
  // edge-on rays are useless for dragging, and intersectPlane would hand
  // back the ray origin for the exactly coplanar case
  if (Math.abs(plane.normal.dot(ray.ray.direction)) < 1e-9) return null;
  const hit = new Vector3();
  return ray.ray.intersectPlane(plane, hit) ? hit : null;
}

/** Vertical-modifier constraint: keep the marker's x/y, move only z. */
export function constrainVertical(marker: Vector3, hit: Vector3): Vector3 {
  return new Vector3(marker.x, marker.y, hit.z);
}
