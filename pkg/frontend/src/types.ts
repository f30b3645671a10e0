// Wire shapes of the three backend services, as served over JSON.

export interface AreaBounds {
  area_id: string;
  name: string;
  min_x: number;
  min_y: number;
  max_x: number;
  max_y: number;
}

export interface DevicePose {
  usnd_id: string;
  x: number;
  y: number;
  heading: number;
  beacon_enabled: boolean;
}

export interface WorldSnapshot {
  area: AreaBounds;
  tick: number;
  discovery_range_m: number;
  cone_half_angle_rad: number;
  poses: DevicePose[];
}

export interface ServedProfile {
  user_id: string;
  fields: Record<string, string | string[]>;
}

export interface RegisterResult {
  session_token: string;
  area_id: string;
}

export type DisplayLine = [string, string];

/** What the profile panel holds: a rendered display or a verbatim error code. */
export type PanelEntry =
  | { kind: "display"; targetUserId: string; lines: DisplayLine[] }
  | { kind: "error"; code: string };

export interface Settings {
  worldUrl: string;
  ubiservUrl: string;
  snUrl: string;
}
