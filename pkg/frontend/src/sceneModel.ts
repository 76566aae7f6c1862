/**
 * Client-side mirror of the sim, built purely from envelopes. The render
 * loop drains the socket backlog once per frame, coalesces it (latest frame
 * per topic, except occupancy deltas which all apply), and feeds the result
 * here. Rendering reads this model and never touches the socket.
 */

import {
  Envelope, GoalPayload, OccupancyPayload, PathPayload, TakeControlPayload,
  Vec3, isGoalPayload, isOccupancyPayload, isOdomPayload, isPathPayload,
  odomId, voxelCenter,
} from "./protocol.js";

export const TRAIL_MAX = 400;

export interface AgentView {
  id: number;
  p: Vec3;
  v: Vec3;
  trail: Vec3[];
}

export interface SceneModel {
  connection: "connecting" | "open" | "closed";
  generation: number;            // bumped on every fresh connection
  agents: Map<number, AgentView>;
  pc: { p: Vec3; v: Vec3 } | null;
  goal: GoalPayload | null;
  path: PathPayload | null;
  voxels: Map<string, Vec3>;     // "i,j,k" -> world center
  gridResolution: number;
  controlOwned: boolean;
  denialReason: string | null;
  marker: Vec3 | null;           // operator marker; set on grant, dragged after
  lastError: string | null;
  lastStampMs: number;
  frames: number;
}

export function emptyScene(): SceneModel {
  return {
    connection: "connecting",
    generation: 0,
    agents: new Map(),
    pc: null,
    goal: null,
    path: null,
    voxels: new Map(),
    gridResolution: 0.2,
    controlOwned: false,
    denialReason: null,
    marker: null,
    lastError: null,
    lastStampMs: 0,
    frames: 0,
  };
}

/** Wipe per-connection state; a fresh snapshot is about to arrive. */
export function resetForSnapshot(m: SceneModel): void {
  m.generation += 1;
  m.agents.clear();
  m.pc = null;
  m.goal = null;
  m.path = null;
  m.voxels.clear();
  m.controlOwned = false;
  m.marker = null;
  m.frames = 0;
}

/**
 * Latest-per-topic coalescing, preserving arrival order of the survivors.
 * static_occupancy frames are deltas and must all be applied.
 */
export function coalesce(batch: Envelope[]): Envelope[] {
  const lastIndex = new Map<string, number>();
  batch.forEach((env, i) => {
    if (env.topic !== "static_occupancy") lastIndex.set(env.topic, i);
  });
  return batch.filter((env, i) =>
    env.topic === "static_occupancy" || lastIndex.get(env.topic) === i);
}

export function barycenter(m: SceneModel): Vec3 {
  const agents = [...m.agents.values()];
  if (agents.length === 0) return [0, 0, 0];
  const sum: Vec3 = [0, 0, 0];
  for (const a of agents) {
    sum[0] += a.p[0];
    sum[1] += a.p[1];
    sum[2] += a.p[2];
  }
  return [sum[0] / agents.length, sum[1] / agents.length, sum[2] / agents.length];
}

export function applyEnvelope(m: SceneModel, env: Envelope): void {
  // overflow on the server: the stream restarts from a full snapshot, so
  // accumulated voxels would otherwise double up
  if (env.resnapshot) m.voxels.clear();
  m.lastStampMs = Math.max(m.lastStampMs, env.stamp_ms);
  m.frames += 1;

  const id = odomId(env.topic);
  if (id !== null) {
    if (!isOdomPayload(env.data)) return;
    if (id === "pc") {
      m.pc = { p: env.data.p, v: env.data.v };
    } else {
      const existing = m.agents.get(id);
      if (existing) {
        existing.p = env.data.p;
        existing.v = env.data.v;
        existing.trail.push(env.data.p);
        if (existing.trail.length > TRAIL_MAX) existing.trail.shift();
      } else {
        m.agents.set(id, { id, p: env.data.p, v: env.data.v,
                           trail: [env.data.p] });
      }
    }
    return;
  }

  switch (env.topic) {
    case "final_goal":
      if (isGoalPayload(env.data)) m.goal = env.data;
      break;
    case "mpl_path":
      if (isPathPayload(env.data)) m.path = env.data as PathPayload;
      break;
    case "static_occupancy":
      if (isOccupancyPayload(env.data)) applyOccupancy(m, env.data);
      break;
    case "take_control":
      applyTakeControl(m, env.data as TakeControlPayload);
      break;
    case "error":
      m.lastError = String((env.data as { message?: unknown })?.message ?? env.data);
      break;
    default:
      break; // unknown outbound topics are ignorable by design
  }
}

function applyOccupancy(m: SceneModel, data: OccupancyPayload): void {
  m.gridResolution = data.resolution;
  for (const key of data.keys) {
    m.voxels.set(key.join(","), voxelCenter(key, data.resolution, data.origin));
  }
}

function applyTakeControl(m: SceneModel, data: TakeControlPayload): void {
  if (data.granted === true) {
    m.controlOwned = true;
    m.denialReason = null;
    m.marker = barycenter(m);
  } else {
    m.controlOwned = false;
    m.marker = null;
    m.denialReason = data.released ? null : (data.reason ?? null);
  }
}

export function applyBatch(m: SceneModel, batch: Envelope[]): void {
  for (const env of coalesce(batch)) applyEnvelope(m, env);
}
