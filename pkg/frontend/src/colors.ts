/**
 * Height gradient for voxel cubes: red at the floor, green mid-height,
 * purple at the top. Endpoints are fixed so the mapping is a pure function
 * of the voxel center's z:
 *
 *   z <= LOW_Z   -> RED    (0.84, 0.15, 0.16)
 *   z  = mid     -> GREEN  (0.18, 0.70, 0.28)
 *   z >= HIGH_Z  -> PURPLE (0.56, 0.17, 0.78)
 *
 * with linear interpolation on each half. LOW_Z/HIGH_Z cover the corridor
 * scenarios (slabs at z ~ -0.1 and ~ 2.1).
 */

export const LOW_Z = -0.5;
export const HIGH_Z = 2.5;

const RED: [number, number, number] = [0.84, 0.15, 0.16];
const GREEN: [number, number, number] = [0.18, 0.7, 0.28];
const PURPLE: [number, number, number] = [0.56, 0.17, 0.78];

function lerp(a: [number, number, number], b: [number, number, number],
              t: number): [number, number, number] {
  return [a[0] + (b[0] - a[0]) * t,
          a[1] + (b[1] - a[1]) * t,
          a[2] + (b[2] - a[2]) * t];
}

export function heightColor(z: number, low = LOW_Z,
                            high = HIGH_Z): [number, number, number] {
  const mid = 0.5 * (low + high);
  if (z <= low) return [...RED];
  if (z >= high) return [...PURPLE];
  if (z <= mid) return lerp(RED, GREEN, (z - low) / (mid - low));
  return lerp(GREEN, PURPLE, (z - mid) / (high - mid));
}
