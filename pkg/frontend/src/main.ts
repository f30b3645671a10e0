import { ApiClient } from "./api.js";
import { renderFloor, type Dom } from "./render.js";
import { ConsoleState, FIELD_LABELS } from "./viewmodel.js";

const POLL_INTERVAL_MS = 500;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const dom: Dom = {
  canvas: el<HTMLCanvasElement>("floor"),
  tickLabel: el("tick"),
  banner: el("banner"),
  nearbyList: el("nearby"),
  panelTitle: el("panel-title"),
  panelLines: el("panel-lines"),
  historyLabel: el("history"),
  optOutBox: el<HTMLInputElement>("opt-out"),
};

const worldUrlInput = el<HTMLInputElement>("world-url");
const ubiservUrlInput = el<HTMLInputElement>("ubiserv-url");
const snUrlInput = el<HTMLInputElement>("sn-url");

const api = new ApiClient({
  worldUrl: worldUrlInput.value,
  ubiservUrl: ubiservUrlInput.value,
  snUrl: snUrlInput.value,
});
const state = new ConsoleState(api);

el<HTMLButtonElement>("apply-settings").addEventListener("click", () => {
  api.settings = {
    worldUrl: worldUrlInput.value,
    ubiservUrl: ubiservUrlInput.value,
    snUrl: snUrlInput.value,
  };
});

function repaint(): void {
  renderFloor(state.view(), dom);
}

async function act(op: () => Promise<void>): Promise<void> {
  try {
    await op();
  } catch (err) {
    state.banner = String(err);
  }
  repaint();
}

el<HTMLButtonElement>("select").addEventListener("click", () => {
  const id = el<HTMLInputElement>("device-id").value.trim();
  void act(() => state.selectDevice(id === "" ? null : id));
});

const STEP = 0.5;
const TURN = Math.PI / 12;
const moves: Array<[string, number, number, number]> = [
  ["move-up", 0, STEP, 0],
  ["move-down", 0, -STEP, 0],
  ["move-left", -STEP, 0, 0],
  ["move-right", STEP, 0, 0],
  ["turn-left", 0, 0, TURN],
  ["turn-right", 0, 0, -TURN],
];
for (const [id, dx, dy, dh] of moves) {
  el<HTMLButtonElement>(id).addEventListener("click", () =>
    void act(() => state.steer(dx, dy, dh)),
  );
}

el<HTMLButtonElement>("point").addEventListener("click", () =>
  void act(() => state.pointRequest()),
);
dom.optOutBox.addEventListener("change", () =>
  void act(() => state.toggleOptOut()),
);
el<HTMLButtonElement>("beacon").addEventListener("click", () =>
  void act(() => state.toggleBeacon()),
);

const policyBoxes = el("policy-boxes");
for (const [field, label] of FIELD_LABELS) {
  const wrap = document.createElement("label");
  const box = document.createElement("input");
  box.type = "checkbox";
  box.checked = field === "name";
  box.addEventListener("change", () => {
    state.policyUserId = el<HTMLInputElement>("policy-user").value.trim();
    void act(() => state.togglePolicyField(field));
  });
  wrap.appendChild(box);
  wrap.appendChild(document.createTextNode(" " + label));
  policyBoxes.appendChild(wrap);
}

async function tickLoop(): Promise<void> {
  try {
    await state.poll();
  } catch {
    state.banner = "world unreachable";
  }
  repaint();
  setTimeout(tickLoop, POLL_INTERVAL_MS);
}

void tickLoop();
