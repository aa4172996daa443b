import { describe, expect, it } from "vitest";

import { SessionClient, type ViewState } from "../src/client.js";
import { buildRenderModel } from "../src/render.js";
import type { CharacterScene, ClientMessage, ServerMessage } from "../src/protocol.js";

class FakeTransport {
  sent: ClientMessage[] = [];
  send(message: ClientMessage): void {
    this.sent.push(message);
  }
}

function scene(current: number[], items: (number | null)[]): CharacterScene {
  const slots = items.map((item, i) => ({
    slot: i,
    item,
    label: item === null ? null : `item_${item}`,
    center: [0.125 + 0.25 * i, 0.9] as [number, number],
    width: 0.22,
  }));
  slots.push({ slot: 3, item: null, label: "Next", center: [0.875, 0.9], width: 0.22 });
  return {
    task: "character",
    slots,
    current,
    attributes: ["shoes", "shirt", "glasses", "backpack", "dance"],
    item_states: [
      ["red", "blue", "white"],
      ["orange", "red", "blue"],
      ["reading", "goggles", "diving"],
      ["pink", "blue", "red"],
      ["hiphop", "break", "silly"],
    ],
  };
}

function harness() {
  const transport = new FakeTransport();
  const views: ViewState[] = [];
  const client = new SessionClient(transport, (view) => views.push(view));
  const feed = (message: ServerMessage) => client.handleMessage(message);
  feed({ type: "session_start", session_id: "s", task: "character", condition: "adaptive", trials: 2 });
  feed({
    type: "trial_begin",
    trial: 0,
    revision: 1,
    goal: { states: [1, 0, 0, 0, 0] },
    scene: scene([0, 0, 0, 0, 0], [1, 4, 7]),
    step_limit: 3,
  });
  return { transport, client, views, feed };
}

describe("lock-step discipline", () => {
  it("sends a click and locks input until the answer arrives", () => {
    const { transport, client, feed } = harness();
    expect(client.state.inputLocked).toBe(false);
    expect(client.click("slot_0")).toBe(true);
    expect(client.state.inputLocked).toBe(true);
    // double-click during the lock is swallowed
    expect(client.click("slot_1")).toBe(false);
    expect(transport.sent.filter((m) => m.type === "user_click")).toHaveLength(1);
    feed({ type: "ui_update", trial: 0, revision: 2, scene: scene([1, 0, 0, 0, 0], [2, 5, 8]) });
    expect(client.state.inputLocked).toBe(false);
    const { clicks, answers } = client.lockStepCounters;
    expect(clicks).toBe(answers);
  });

  it("counts one answer per click across a whole trial", () => {
    const { client, feed } = harness();
    client.click("slot_0");
    feed({ type: "ui_update", trial: 0, revision: 2, scene: scene([1, 0, 0, 0, 0], [2, 5, 8]) });
    client.click("next");
    feed({ type: "trial_end", trial: 0, success: true, actions: 2, wall_time_s: 3.5 });
    const { clicks, answers } = client.lockStepCounters;
    expect(clicks).toBe(2);
    expect(answers).toBe(2);
    expect(client.state.phase).toBe("between_trials");
  });

  it("clicks before trial_begin are rejected", () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport, () => undefined);
    expect(client.click("slot_0")).toBe(false);
    expect(transport.sent).toHaveLength(0);
  });
});

describe("revision guard", () => {
  it("ignores stale ui_updates and keeps the highest revision", () => {
    const { client, feed } = harness();
    client.click("slot_0");
    feed({ type: "ui_update", trial: 0, revision: 2, scene: scene([1, 0, 0, 0, 0], [2, 5, 8]) });
    const sceneAfter = client.state.scene;
    feed({ type: "ui_update", trial: 0, revision: 1, scene: scene([0, 0, 0, 0, 0], [9, 10, 11]) });
    expect(client.state.scene).toBe(sceneAfter);
    expect(client.currentRevision).toBe(2);
  });

  it("clicks carry the current revision", () => {
    const { transport, client, feed } = harness();
    client.click("slot_0");
    feed({ type: "ui_update", trial: 0, revision: 2, scene: scene([1, 0, 0, 0, 0], [2, 5, 8]) });
    client.click("slot_1");
    const clicks = transport.sent.filter((m) => m.type === "user_click");
    expect((clicks[0] as { revision: number }).revision).toBe(1);
    expect((clicks[1] as { revision: number }).revision).toBe(2);
  });

  it("recovers from LAYOUT_STALE by unlocking after the error", () => {
    const { client, feed } = harness();
    client.click("slot_0");
    feed({ type: "error", code: "LAYOUT_STALE", message: "stale" });
    expect(client.state.inputLocked).toBe(false);
    const { clicks, answers } = client.lockStepCounters;
    expect(clicks).toBe(answers);
  });
});

describe("session flow", () => {
  it("handles trial_end -> trial_begin -> session_end", () => {
    const { client, feed } = harness();
    client.click("slot_0");
    feed({ type: "trial_end", trial: 0, success: true, actions: 1, wall_time_s: 2.0 });
    expect(client.state.lastTrialEnd?.success).toBe(true);
    feed({
      type: "trial_begin",
      trial: 1,
      revision: 1,
      goal: { states: [0, 0, 0, 0, 2] },
      scene: scene([0, 0, 0, 0, 0], [14, 2, 6]),
      step_limit: 3,
    });
    expect(client.state.phase).toBe("running");
    expect(client.state.trial).toBe(1);
    expect(client.state.actionsThisTrial).toBe(0);
    client.click("slot_0");
    feed({ type: "trial_end", trial: 1, success: true, actions: 1, wall_time_s: 1.2 });
    feed({ type: "session_end", trials_completed: 2, successes: 2 });
    expect(client.state.phase).toBe("finished");
    expect(client.state.successes).toBe(2);
  });

  it("fatal errors surface in the banner and lock input", () => {
    const { client, feed } = harness();
    feed({ type: "error", code: "UNKNOWN_ELEMENT", message: "nope" });
    expect(client.state.phase).toBe("error");
    expect(client.state.banner).toContain("UNKNOWN_ELEMENT");
    expect(client.click("slot_0")).toBe(false);
  });

  it("disconnect shows the reconnect banner", () => {
    const { client } = harness();
    client.handleDisconnect();
    expect(client.state.phase).toBe("disconnected");
    expect(client.state.banner).toMatch(/connection lost/);
  });
});

describe("render model", () => {
  it("highlights exactly the mismatched attributes", () => {
    const { client } = harness(); // goal [1,0,0,0,0], current [0,...]
    const model = buildRenderModel(client.state);
    const mismatches = model.current.filter((row) => row.mismatch);
    expect(mismatches).toHaveLength(1);
    expect(mismatches[0].attribute).toBe("shoes");
    expect(model.target[0].value).toBe("blue");
  });

    it("produces four clickable tiles with toolbar geometry", () => {
    const { client } = harness();
    const model = buildRenderModel(client.state);
    expect(model.tiles).toHaveLength(4);
    expect(model.tiles.map((t) => t.id)).toEqual(["slot_0", "slot_1", "slot_2", "next"]);
    expect(model.tiles[0].w).toBeCloseTo(22);
    expect(model.tiles.every((t) => t.clickable)).toBe(true);
  });

  it("locks tiles while waiting for the server", () => {
    const { client } = harness();
    client.click("slot_0");
    const model = buildRenderModel(client.state);
    expect(model.tiles.every((t) => !t.clickable)).toBe(true);
    expect(model.statusLine).toMatch(/waiting/);
  });

  it("shows the trial summary overlay between trials", () => {
    const { client, feed } = harness();
    client.click("slot_0");
    feed({ type: "trial_end", trial: 0, success: true, actions: 4, wall_time_s: 7.25 });
    const model = buildRenderModel(client.state);
    expect(model.overlay).toContain("4 actions");
    expect(model.overlay).toContain("7.3");
  });
});
