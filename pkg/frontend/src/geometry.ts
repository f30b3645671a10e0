// Floor geometry mirrored from the world service so the console can draw
// overlays and resolve a pointing gesture from the snapshot it already has.
// The server stays authoritative; boundary rules (range and cone both
// inclusive) must match it exactly and are pinned by tests.

import type { DevicePose, WorldSnapshot } from "./types.js";

export const TWO_PI = Math.PI * 2;

export function normalizeHeading(h: number): number {
  let r = h % TWO_PI;
  if (r < 0) r += TWO_PI;
  // fold -0 and the 2*pi endpoint back to 0
  return r === 0 || r === TWO_PI ? 0 : r;
}

/** Smallest signed angle equivalent to `a`, in [-pi, pi]. */
export function foldAngle(a: number): number {
  let r = a % TWO_PI;
  if (r > Math.PI) r -= TWO_PI;
  if (r < -Math.PI) r += TWO_PI;
  return r;
}

function poseOf(snapshot: WorldSnapshot, usndId: string): DevicePose | null {
  return snapshot.poses.find((p) => p.usnd_id === usndId) ?? null;
}

interface Candidate {
  dist: number;
  id: string;
}

function rank(a: Candidate, b: Candidate): number {
  if (a.dist !== b.dist) return a.dist - b.dist;
  return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
}

function candidatesInRange(snapshot: WorldSnapshot, me: DevicePose): Candidate[] {
  const out: Candidate[] = [];
  for (const other of snapshot.poses) {
    if (other.usnd_id === me.usnd_id || !other.beacon_enabled) continue;
    const dist = Math.hypot(other.x - me.x, other.y - me.y);
    if (dist <= snapshot.discovery_range_m) out.push({ dist, id: other.usnd_id });
  }
  return out.sort(rank);
}

/** Beacon-enabled peers within discovery range, nearest first, ties by id. */
export function neighbors(snapshot: WorldSnapshot, usndId: string): string[] {
  const me = poseOf(snapshot, usndId);
  if (!me) return [];
  return candidatesInRange(snapshot, me).map((c) => c.id);
}

/**
 * The device the given one is pointing at: nearest beacon-enabled peer
 * within range whose bearing deviates from the heading by at most the
 * cone half-angle. Null when nothing qualifies.
 */
export function resolvePointing(
  snapshot: WorldSnapshot,
  usndId: string,
): string | null {
  const me = poseOf(snapshot, usndId);
  if (!me) return null;
  let best: Candidate | null = null;
  for (const other of snapshot.poses) {
    if (other.usnd_id === me.usnd_id || !other.beacon_enabled) continue;
    const dist = Math.hypot(other.x - me.x, other.y - me.y);
    if (dist > snapshot.discovery_range_m) continue;
    const bearing = Math.atan2(other.y - me.y, other.x - me.x);
    const deviation = Math.abs(foldAngle(bearing - me.heading));
    if (deviation > snapshot.cone_half_angle_rad) continue;
    const cand = { dist, id: other.usnd_id };
    if (best === null || rank(cand, best) < 0) best = cand;
  }
  return best ? best.id : null;
}
