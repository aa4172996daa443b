// Browser entry point: connect, run the session, render.
//
// Configuration comes from URL parameters:
//   ?server=ws://127.0.0.1:8000/session&task=character&condition=adaptive&trials=30&seed=1

import { SessionClient } from "./client.js";
import type { ServerMessage } from "./protocol.js";
import { applyToDom, buildRenderModel } from "./render.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const server = param("server", "ws://127.0.0.1:8000/session");
  const task = param("task", "character");
  const condition = param("condition", "adaptive");
  const trials = parseInt(param("trials", "30"), 10);
  const seedRaw = param("seed", "");

  const socket = new WebSocket(server);
  const client = new SessionClient(
    { send: (message) => socket.send(JSON.stringify(message)) },
    (view) => applyToDom(buildRenderModel(view), root, (id) => client.click(id)),
  );

  socket.addEventListener("open", () => {
    client.open(task, condition, trials, seedRaw ? parseInt(seedRaw, 10) : undefined);
  });
  socket.addEventListener("message", (event) => {
    client.handleMessage(JSON.parse(event.data as string) as ServerMessage);
  });
  socket.addEventListener("close", () => client.handleDisconnect());
  socket.addEventListener("error", () => client.handleDisconnect());
}

boot();
