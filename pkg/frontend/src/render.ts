// Render-model computation (pure, unit-testable) and its DOM application.
//
// The study view is a 2D rendition of the task: a target panel, a current
// panel with mismatches highlighted, and the clickable toolbar/keypad whose
// geometry is proportional to the server's normalized element boxes.

import type { CharacterScene, KeypadScene } from "./protocol.js";
import type { ViewState } from "./client.js";

export interface TileModel {
  id: string; // element id to send on click
  label: string;
  x: number; // percent of the board, left edge
  y: number;
  w: number;
  clickable: boolean;
}

export interface PanelRow {
  attribute: string;
  value: string;
  mismatch: boolean;
}

export interface RenderModel {
  phase: ViewState["phase"];
  banner: string | null;
  progress: string;
  statusLine: string;
  target: PanelRow[];
  current: PanelRow[];
  tiles: TileModel[];
  entry: string | null; // keypad entry line
  overlay: string | null; // trial summary between trials
}

export function buildRenderModel(view: ViewState): RenderModel {
  const model: RenderModel = {
    phase: view.phase,
    banner: view.banner,
    progress: view.trialCount ? `trial ${view.trial + 1} / ${view.trialCount}` : "",
    statusLine: view.inputLocked ? "waiting for interface…" : "your turn — solve the task as fast as you can",
    target: [],
    current: [],
    tiles: [],
    entry: null,
    overlay: null,
  };
  if (view.phase === "between_trials" && view.lastTrialEnd) {
    const t = view.lastTrialEnd;
    model.overlay = `${t.success ? "solved" : "out of steps"} — ${t.actions} actions, ${t.wall_time_s.toFixed(1)} s`;
  }
  if (view.phase === "finished") {
    model.overlay = `session complete — ${view.successes} / ${view.trialCount} trials solved`;
  }
  const scene = view.scene;
  if (!scene) return model;
  if (scene.task === "character") {
    fillCharacter(model, scene, view);
  } else {
    fillKeypad(model, scene, view);
  }
  return model;
}

function fillCharacter(model: RenderModel, scene: CharacterScene, view: ViewState): void {
  const goal = view.goalStates ?? [];
  scene.attributes.forEach((attribute, a) => {
    const mismatch = goal.length > 0 && goal[a] !== scene.current[a];
    model.target.push({
      attribute,
      value: goal.length ? scene.item_states[a][goal[a]] : "?",
      mismatch,
    });
    model.current.push({ attribute, value: scene.item_states[a][scene.current[a]], mismatch });
  });
  for (const slot of scene.slots) {
    const isNext = slot.label === "Next";
    model.tiles.push({
      id: isNext ? "next" : `slot_${slot.slot}`,
      label: slot.label ?? "(empty)",
      x: (slot.center[0] - slot.width / 2) * 100,
      y: (1 - slot.center[1] - slot.width / 2) * 100,
      w: slot.width * 100,
      clickable: !view.inputLocked,
    });
  }
}

function fillKeypad(model: RenderModel, scene: KeypadScene, view: ViewState): void {
  model.entry = scene.entry.join("");
  const goal = view.goalSequence;
  if (goal) {
    const labels = "0123456789.⏎";
    model.target.push({
      attribute: "price",
      value: goal.map((s) => (s === 11 ? "⏎" : labels[s])).join(""),
      mismatch: false,
    });
  }
  for (const key of scene.keys) {
    model.tiles.push({
      id: `key_${key.symbol}`,
      label: key.label === "enter" ? "⏎" : key.label,
      x: (key.center[0] - key.width / 2) * 100,
      y: (1 - key.center[1] - key.width / 2) * 100,
      w: key.width * 100,
      clickable: !view.inputLocked,
    });
  }
}

// --- DOM application -------------------------------------------------------

export function applyToDom(model: RenderModel, root: HTMLElement, onClick: (id: string) => void): void {
  const board = requireChild(root, ".board");
  board.innerHTML = "";
  for (const tile of model.tiles) {
    const el = document.createElement("button");
    el.className = "tile" + (tile.clickable ? "" : " locked");
    el.textContent = tile.label;
    el.style.left = `${tile.x}%`;
    el.style.top = `${tile.y}%`;
    el.style.width = `${tile.w}%`;
    el.style.height = `${tile.w}%`;
    el.disabled = !tile.clickable;
    el.addEventListener("click", () => onClick(tile.id));
    board.appendChild(el);
  }
  renderPanel(requireChild(root, ".target-panel"), "Target", model.target);
  renderPanel(requireChild(root, ".current-panel"), "Current", model.current);
  requireChild(root, ".progress").textContent = model.progress;
  requireChild(root, ".status").textContent = model.statusLine;
  const entryEl = requireChild(root, ".entry");
  entryEl.textContent = model.entry ?? "";
  const banner = requireChild(root, ".banner");
  banner.textContent = model.banner ?? "";
  banner.classList.toggle("hidden", model.banner === null);
  const overlay = requireChild(root, ".overlay");
  overlay.textContent = model.overlay ?? "";
  overlay.classList.toggle("hidden", model.overlay === null);
}

function renderPanel(el: HTMLElement, title: string, rows: PanelRow[]): void {
  el.innerHTML = `<h2>${title}</h2>`;
  for (const row of rows) {
    const div = document.createElement("div");
    div.className = "panel-row" + (row.mismatch ? " mismatch" : "");
    div.textContent = `${row.attribute}: ${row.value}`;
    el.appendChild(div);
  }
}

function requireChild(root: HTMLElement, selector: string): HTMLElement {
  const el = root.querySelector<HTMLElement>(selector);
  if (!el) throw new Error(`missing ${selector} in study layout`);
  return el;
}
