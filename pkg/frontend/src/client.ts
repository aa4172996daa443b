// Session state machine: strict lock-step with the server.
//
// Input is disabled from the moment a click is sent until the matching
// ui_update or trial_end arrives; layout revisions are monotonic and stale
// updates are ignored.

import type {
  ClientMessage,
  Scene,
  ServerMessage,
  TrialBegin,
  TrialEnd,
} from "./protocol.js";

export interface Transport {
  send(message: ClientMessage): void;
}

export interface ViewState {
  phase: "connecting" | "running" | "between_trials" | "finished" | "error" | "disconnected";
  scene: Scene | null;
  goalStates: number[] | null;
  goalSequence: number[] | null;
  trial: number;
  trialCount: number;
  inputLocked: boolean;
  actionsThisTrial: number;
  lastTrialEnd: TrialEnd | null;
  successes: number;
  banner: string | null;
}

export type Listener = (view: ViewState) => void;

export class SessionClient {
  private transport: Transport;
  private listener: Listener;
  private revision = 0;
  private pendingClick = false;
  private clicksSent = 0;
  private answersReceived = 0;
  private view: ViewState = {
    phase: "connecting",
    scene: null,
    goalStates: null,
    goalSequence: null,
    trial: 0,
    trialCount: 0,
    inputLocked: true,
    actionsThisTrial: 0,
    lastTrialEnd: null,
    successes: 0,
    banner: null,
  };

  constructor(transport: Transport, listener: Listener) {
    this.transport = transport;
    this.listener = listener;
  }

  get state(): ViewState {
    return this.view;
  }

  get currentRevision(): number {
    return this.revision;
  }

  /** lock-step bookkeeping: sent clicks vs. answering ui_update/trial_end */
  get lockStepCounters(): { clicks: number; answers: number } {
    return { clicks: this.clicksSent, answers: this.answersReceived };
  }

  open(task: string, condition: string, trials: number, seed?: number): void {
    const message: ClientMessage = { type: "open_session", task, condition, trials };
    if (seed !== undefined) (message as { seed?: number }).seed = seed;
    this.transport.send(message);
  }

  /** Returns true when the click was actually sent (input unlocked). */
  click(element: string): boolean {
    if (this.view.inputLocked || this.pendingClick || this.view.phase !== "running") {
      return false; // swallowed: lock-step discipline
    }
    this.pendingClick = true;
    this.update({ inputLocked: true });
    this.clicksSent += 1;
    this.transport.send({
      type: "user_click",
      element,
      revision: this.revision,
      client_ts: Date.now() / 1000,
    });
    return true;
  }

  handleMessage(message: ServerMessage): void {
    switch (message.type) {
      case "session_start":
        this.update({ phase: "connecting", trialCount: message.trials, banner: null });
        break;
      case "trial_begin":
        this.beginTrial(message);
        break;
      case "ui_update":
        if (message.revision <= this.revision) {
          return; // stale or duplicate layout: revision guard
        }
        this.revision = message.revision;
        this.resolveAnswer();
        this.update({
          scene: message.scene,
          phase: "running",
          inputLocked: false,
          actionsThisTrial: this.view.actionsThisTrial + 1,
        });
        break;
      case "trial_end":
        this.resolveAnswer();
        this.update({
          phase: "between_trials",
          inputLocked: true,
          lastTrialEnd: message,
          successes: this.view.successes + (message.success ? 1 : 0),
        });
        break;
      case "session_end":
        this.update({ phase: "finished", inputLocked: true });
        break;
      case "error":
        if (message.code === "LAYOUT_STALE") {
          // the stale click is answered by a same-revision refresh that the
          // guard ignores, so settle the pending click here and unlock
          this.resolveAnswer();
          this.update({ banner: "layout was stale; resynchronized", inputLocked: false });
        } else {
          this.update({ phase: "error", banner: `${message.code}: ${message.message}`, inputLocked: true });
        }
        break;
    }
    this.listener(this.view);
  }

  handleDisconnect(): void {
    if (this.view.phase !== "finished") {
      this.update({ phase: "disconnected", inputLocked: true, banner: "connection lost — reload to start a new session" });
      this.listener(this.view);
    }
  }

  private beginTrial(message: TrialBegin): void {
    this.revision = message.revision;
    this.pendingClick = false;
    this.update({
      phase: "running",
      scene: message.scene,
      goalStates: message.goal.states ?? null,
      goalSequence: message.goal.sequence ?? null,
      trial: message.trial,
      inputLocked: false,
      actionsThisTrial: 0,
      banner: null,
    });
  }

  private resolveAnswer(): void {
    if (this.pendingClick) {
      this.pendingClick = false;
      this.answersReceived += 1;
    }
  }

  private update(changes: Partial<ViewState>): void {
    this.view = { ...this.view, ...changes };
  }
}
