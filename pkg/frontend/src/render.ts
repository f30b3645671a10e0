// Canvas and DOM painting. Pure output: reads a FloorView, writes pixels
// and text, holds nothing.

import type { FloorView } from "./viewmodel.js";

export interface Dom {
  canvas: HTMLCanvasElement;
  tickLabel: HTMLElement;
  banner: HTMLElement;
  nearbyList: HTMLElement;
  panelTitle: HTMLElement;
  panelLines: HTMLElement;
  historyLabel: HTMLElement;
  optOutBox: HTMLInputElement;
}

export function renderFloor(view: FloorView, dom: Dom): void {
  const ctx = dom.canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = dom.canvas;
  ctx.clearRect(0, 0, width, height);
  const snap = view.snapshot;
  if (!snap) return;

  const pad = 12;
  const sx = (width - 2 * pad) / (snap.area.max_x - snap.area.min_x);
  const sy = (height - 2 * pad) / (snap.area.max_y - snap.area.min_y);
  const px = (x: number) => pad + (x - snap.area.min_x) * sx;
  // canvas y grows downward, floor y grows upward
  const py = (y: number) => height - pad - (y - snap.area.min_y) * sy;

  ctx.strokeStyle = "#888";
  ctx.strokeRect(px(snap.area.min_x), py(snap.area.max_y),
    (snap.area.max_x - snap.area.min_x) * sx,
    (snap.area.max_y - snap.area.min_y) * sy);

  const selectedPose = snap.poses.find((p) => p.usnd_id === view.selected);
  if (selectedPose) {
    const cx = px(selectedPose.x);
    const cy = py(selectedPose.y);
    const r = snap.discovery_range_m * sx;
    ctx.strokeStyle = "#4a90d9";
    ctx.beginPath();
    ctx.arc(cx, cy, r, 0, Math.PI * 2);
    ctx.stroke();
    ctx.fillStyle = "rgba(74,144,217,0.15)";
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    // canvas angles are mirrored because of the y flip
    ctx.arc(cx, cy, r,
      -(selectedPose.heading - snap.cone_half_angle_rad),
      -(selectedPose.heading + snap.cone_half_angle_rad),
      true);
    ctx.closePath();
    ctx.fill();
  }

  for (const pose of snap.poses) {
    const cx = px(pose.x);
    const cy = py(pose.y);
    const isTarget = pose.usnd_id === view.coneTarget;
    ctx.fillStyle = !pose.beacon_enabled
      ? "#bbb"
      : pose.usnd_id === view.selected
        ? "#d9534f"
        : isTarget
          ? "#2b8a3e"
          : "#333";
    ctx.beginPath();
    ctx.arc(cx, cy, 5, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = ctx.fillStyle;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + 10 * Math.cos(pose.heading), cy - 10 * Math.sin(pose.heading));
    ctx.stroke();
    ctx.fillStyle = "#555";
    ctx.font = "9px sans-serif";
    ctx.fillText(pose.usnd_id.slice(-4), cx + 7, cy - 7);
  }

  dom.tickLabel.textContent = `tick ${snap.tick}`;
  dom.banner.textContent = view.banner ?? "";
  dom.banner.style.display = view.banner ? "block" : "none";

  dom.nearbyList.innerHTML = "";
  for (const id of view.nearby) {
    const li = document.createElement("li");
    li.textContent = id + (id === view.coneTarget ? "  <- in cone" : "");
    dom.nearbyList.appendChild(li);
  }

  if (view.panel === null) {
    dom.panelTitle.textContent = "(nothing requested yet)";
    dom.panelLines.innerHTML = "";
  } else if (view.panel.kind === "error") {
    dom.panelTitle.textContent = view.panel.code;
    dom.panelLines.innerHTML = "";
  } else {
    dom.panelTitle.textContent = view.panel.targetUserId;
    dom.panelLines.innerHTML = "";
    for (const [label, value] of view.panel.lines) {
      const li = document.createElement("li");
      li.textContent = `${label}: ${value}`;
      dom.panelLines.appendChild(li);
    }
  }
  dom.historyLabel.textContent = `${view.history.length} earlier result(s)`;
  dom.optOutBox.checked = view.serviceEnabled === false;
  dom.optOutBox.disabled = view.serviceEnabled === null;
}
