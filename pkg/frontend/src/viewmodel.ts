// Console state: one selected device, the latest accepted floor snapshot,
// and the profile panel. All state here is either a cached copy of a
// snapshot or bookkeeping for this console's own session; nothing is
// authoritative.

import { ApiClient, ApiError } from "./api.js";
import { neighbors, normalizeHeading, resolvePointing } from "./geometry.js";
import type {
  DevicePose,
  DisplayLine,
  PanelEntry,
  ServedProfile,
  WorldSnapshot,
} from "./types.js";

// label table and order mirrored from the device layer; the end-to-end
// test pins these against an actual device transcript
export const FIELD_LABELS: ReadonlyArray<readonly [string, string]> = [
  ["name", "Name"],
  ["location", "Location"],
  ["work_domain", "Work domain"],
  ["contact_info", "Contact"],
  ["qualifications", "Qualifications"],
  ["experience", "Experience"],
  ["job_interest", "Job interest"],
  ["pictures", "Pictures"],
];

export function renderLines(served: ServedProfile): DisplayLine[] {
  const lines: DisplayLine[] = [];
  for (const [field, label] of FIELD_LABELS) {
    if (!(field in served.fields)) continue;
    const value = served.fields[field]!;
    lines.push([label, Array.isArray(value) ? value.join(", ") : value]);
  }
  return lines;
}

interface SessionInfo {
  usndId: string;
  token: string;
  serviceEnabled: boolean;
}

/** Everything the renderer needs, derived fresh on each call. */
export interface FloorView {
  snapshot: WorldSnapshot | null;
  selected: string | null;
  nearby: string[];
  coneTarget: string | null;
  banner: string | null;
  panel: PanelEntry | null;
  history: PanelEntry[];
  serviceEnabled: boolean | null;
  policyAllowed: string[];
}

export class ConsoleState {
  private snapshot: WorldSnapshot | null = null;
  private selected: string | null = null;
  private session: SessionInfo | null = null;
  private panel: PanelEntry | null = null;
  private history: PanelEntry[] = [];
  banner: string | null = null;
  policyUserId = "";
  private policyAllowed = new Set<string>(["name"]);

  constructor(private readonly api: ApiClient) {}

  /**
   * Accept a snapshot unless it is older than what we already show.
   * Returns whether it was applied.
   */
  applySnapshot(snap: WorldSnapshot): boolean {
    if (this.snapshot && snap.tick < this.snapshot.tick) return false;
    this.snapshot = snap;
    if (
      this.selected !== null &&
      !snap.poses.some((p) => p.usnd_id === this.selected)
    ) {
      this.banner = "not present";
    }
    return true;
  }

  async poll(): Promise<void> {
    this.applySnapshot(await this.api.getSnapshot());
  }

  private selectedPose(): DevicePose | null {
    if (!this.snapshot || this.selected === null) return null;
    return (
      this.snapshot.poses.find((p) => p.usnd_id === this.selected) ?? null
    );
  }

  /**
   * Bind the console to a device on the floor. Registers it with the area
   * server (dropping a session this console held for another device), so
   * the opt-out toggle starts from the known enabled state.
   */
  async selectDevice(usndId: string | null): Promise<void> {
    if (usndId === null) {
      this.selected = null;
      return;
    }
    if (!this.snapshot?.poses.some((p) => p.usnd_id === usndId)) {
      this.banner = "UnknownDevice";
      return;
    }
    this.selected = usndId;
    this.banner = null;
    if (this.session?.usndId === usndId) return;
    if (this.session) {
      try {
        await this.api.deregister(this.session.token);
      } catch {
        // a session the server already forgot needs no goodbye
      }
      this.session = null;
    }
    const res = await this.api.register(usndId);
    this.session = {
      usndId,
      token: res.session_token,
      serviceEnabled: true,
    };
  }

  /** Move the selected device relative to its last known pose. */
  async steer(dx: number, dy: number, dheading: number): Promise<void> {
    const pose = this.selectedPose();
    if (!pose) {
      this.banner = "NotAttached";
      return;
    }
    try {
      await this.api.step({
        usnd_id: pose.usnd_id,
        x: pose.x + dx,
        y: pose.y + dy,
        heading: normalizeHeading(pose.heading + dheading),
      });
    } catch (err) {
      this.banner = err instanceof ApiError ? err.code : String(err);
      return;
    }
    await this.poll();
  }

  private pushPanel(entry: PanelEntry): void {
    if (this.panel) this.history.push(this.panel);
    this.panel = entry;
  }

  /** Aim-and-request: resolve the cone target, fetch, show verbatim. */
  async pointRequest(): Promise<void> {
    if (!this.snapshot || this.selected === null || !this.session) {
      this.banner = "NotAttached";
      return;
    }
    const target = resolvePointing(this.snapshot, this.selected);
    if (target === null) {
      this.pushPanel({ kind: "error", code: "NoTarget" });
      return;
    }
    try {
      const served = await this.api.requestProfile(this.session.token, target);
      this.pushPanel({
        kind: "display",
        targetUserId: served.user_id,
        lines: renderLines(served),
      });
    } catch (err) {
      this.pushPanel({
        kind: "error",
        code: err instanceof ApiError ? err.code : String(err),
      });
    }
  }

  async toggleOptOut(): Promise<void> {
    if (!this.session) {
      this.banner = "NotAttached";
      return;
    }
    const next = !this.session.serviceEnabled;
    try {
      await this.api.setService(this.session.token, next);
      this.session.serviceEnabled = next;
    } catch (err) {
      this.banner = err instanceof ApiError ? err.code : String(err);
    }
  }

  async toggleBeacon(): Promise<void> {
    const pose = this.selectedPose();
    if (!pose) {
      this.banner = "NotAttached";
      return;
    }
    try {
      await this.api.setBeacon(pose.usnd_id, !pose.beacon_enabled);
    } catch (err) {
      this.banner = err instanceof ApiError ? err.code : String(err);
      return;
    }
    await this.poll();
  }

  /**
   * Flip one field on the user's event policy and write the whole set.
   * The network has no policy read endpoint, so the checkboxes track what
   * this console last wrote, starting from the name-only default.
   */
  async togglePolicyField(field: string): Promise<void> {
    if (!this.policyUserId) {
      this.banner = "no user id set";
      return;
    }
    const next = new Set(this.policyAllowed);
    if (next.has(field)) next.delete(field);
    else next.add(field);
    try {
      await this.api.setViewPolicy(this.policyUserId, [...next].sort());
      this.policyAllowed = next;
    } catch (err) {
      this.banner = err instanceof ApiError ? err.code : String(err);
    }
  }

  view(): FloorView {
    return {
      snapshot: this.snapshot,
      selected: this.selected,
      nearby:
        this.snapshot && this.selected !== null
          ? neighbors(this.snapshot, this.selected)
          : [],
      coneTarget:
        this.snapshot && this.selected !== null
          ? resolvePointing(this.snapshot, this.selected)
          : null,
      banner: this.banner,
      panel: this.panel,
      history: [...this.history],
      serviceEnabled: this.session?.serviceEnabled ?? null,
      policyAllowed: [...this.policyAllowed].sort(),
    };
  }
}
