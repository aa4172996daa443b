// Wire protocol types, mirroring the session service's JSON schemas.

export interface SlotInfo {
  slot: number;
  item: number | null;
  label: string | null;
  center: [number, number];
  width: number;
}

export interface CharacterScene {
  task: "character";
  slots: SlotInfo[];
  current: number[];
  attributes: string[];
  item_states: string[][];
}

export interface KeyInfo {
  symbol: number;
  label: string;
  center: [number, number];
  width: number;
}

export interface KeypadScene {
  task: "keypad";
  layout: number;
  keys: KeyInfo[];
  entry: string[];
}

export type Scene = CharacterScene | KeypadScene;

export interface SessionStart {
  type: "session_start";
  session_id: string;
  task: string;
  condition: string;
  trials: number;
}

export interface TrialBegin {
  type: "trial_begin";
  trial: number;
  revision: number;
  goal: { states?: number[]; sequence?: number[] };
  scene: Scene;
  step_limit: number;
}

export interface UiUpdate {
  type: "ui_update";
  trial: number;
  revision: number;
  scene: Scene;
}

export interface TrialEnd {
  type: "trial_end";
  trial: number;
  success: boolean;
  actions: number;
  wall_time_s: number;
}

export interface SessionEnd {
  type: "session_end";
  trials_completed: number;
  successes: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  message: string;
}

export type ServerMessage =
  | SessionStart
  | TrialBegin
  | UiUpdate
  | TrialEnd
  | SessionEnd
  | ErrorMessage;

export interface OpenSession {
  type: "open_session";
  task: string;
  condition: string;
  trials: number;
  client?: string;
  seed?: number;
}

export interface UserClick {
  type: "user_click";
  element: string;
  revision: number;
  client_ts: number;
}

export type ClientMessage = OpenSession | UserClick;
