/**
 * Wire types for the bridge WebSocket protocol and small pure helpers for
 * turning payloads into geometry. Every frame in either direction is a JSON
 * envelope { topic, seq, stamp_ms, data }; frames re-sent after a server-side
 * backlog overflow additionally carry resnapshot: true.
 */

export type Vec3 = [number, number, number];

export interface Envelope {
  topic: string;
  seq: number;
  stamp_ms: number;
  data: unknown;
  resnapshot?: boolean;
}

export interface OdomPayload {
  id?: number;
  p: Vec3;
  v: Vec3;
  p_cmd?: Vec3;
}

export interface GoalPayload {
  p: Vec3;
  tolerance: number;
}

export interface PrimitivePayload {
  p0: Vec3;
  v0: Vec3;
  u: Vec3;
  dt: number;
}

export interface PathPayload {
  partial: boolean;
  total_duration: number;
  total_cost: number;
  primitives: PrimitivePayload[];
}

export interface OccupancyPayload {
  resolution: number;
  origin: Vec3;
  keys: [number, number, number][];
}

export interface TakeControlPayload {
  granted?: boolean;
  released?: boolean;
  reason?: string;
}

function isVec3(x: unknown): x is Vec3 {
  return Array.isArray(x) && x.length === 3 && x.every((v) => Number.isFinite(v));
}

/** Parse one inbound frame; null for anything that is not a valid envelope. */
export function parseEnvelope(raw: string): Envelope | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const env = msg as Record<string, unknown>;
  if (typeof env.topic !== "string") return null;
  if (typeof env.seq !== "number" || typeof env.stamp_ms !== "number") return null;
  if (!("data" in env)) return null;
  return env as unknown as Envelope;
}

/** robot_odom_3 -> 3, robot_odom_pc -> "pc", anything else -> null. */
export function odomId(topic: string): number | "pc" | null {
  if (!topic.startsWith("robot_odom_")) return null;
  const suffix = topic.slice("robot_odom_".length);
  if (suffix === "pc") return "pc";
  const id = Number(suffix);
  return Number.isInteger(id) ? id : null;
}

export function isOdomPayload(data: unknown): data is OdomPayload {
  const d = data as OdomPayload;
  return typeof d === "object" && d !== null && isVec3(d.p) && isVec3(d.v);
}

export function isGoalPayload(data: unknown): data is GoalPayload {
  const d = data as GoalPayload;
  return typeof d === "object" && d !== null && isVec3(d.p)
    && typeof d.tolerance === "number";
}

export function isPathPayload(data: unknown): data is PathPayload {
  const d = data as PathPayload;
  return typeof d === "object" && d !== null && Array.isArray(d.primitives)
    && d.primitives.every((pr) => isVec3(pr.p0) && isVec3(pr.v0)
      && isVec3(pr.u) && typeof pr.dt === "number");
}

export function isOccupancyPayload(data: unknown): data is OccupancyPayload {
  const d = data as OccupancyPayload;
  return typeof d === "object" && d !== null
    && typeof d.resolution === "number" && isVec3(d.origin)
    && Array.isArray(d.keys)
    && d.keys.every((k) => Array.isArray(k) && k.length === 3);
}

/** Sample the whole path into a polyline, n points per segment. */
export function pathPolyline(path: PathPayload, n = 8): Vec3[] {
  const pts: Vec3[] = [];
  for (const prim of path.primitives) {
    for (let i = 0; i < n; i++) {
      const t = (prim.dt * i) / n;
      pts.push(segmentPoint(prim, t));
    }
  }
  const last = path.primitives[path.primitives.length - 1];
  if (last) pts.push(segmentPoint(last, last.dt));
  return pts;
}

function segmentPoint(prim: PrimitivePayload, t: number): Vec3 {
  return [
    prim.p0[0] + prim.v0[0] * t + 0.5 * prim.u[0] * t * t,
    prim.p0[1] + prim.v0[1] * t + 0.5 * prim.u[1] * t * t,
    prim.p0[2] + prim.v0[2] * t + 0.5 * prim.u[2] * t * t,
  ];
}

/** Center of voxel (i, j, k): origin + (key + 0.5) * resolution per axis. */
export function voxelCenter(key: [number, number, number], resolution: number,
                            origin: Vec3): Vec3 {
  return [
    origin[0] + (key[0] + 0.5) * resolution,
    origin[1] + (key[1] + 0.5) * resolution,
    origin[2] + (key[2] + 0.5) * resolution,
  ];
}

export function serialize(topic: string, data: unknown): string {
  return JSON.stringify({ topic, data });
}
