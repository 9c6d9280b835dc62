/**
 * Console entry point: one WebSocket, one state store, one paint loop.
 *
 * Every network and input event funnels through `dispatch` into the pure
 * reducer; painting reads the store on requestAnimationFrame. Overrides go
 * through OverrideThrottle so the wire never carries more than 15 per
 * second, and a zero override is sent directly on page unload as the
 * safety default (the server additionally hovers on session drop).
 */

import type { ClientCommand, FrameEvent } from "./protocol";
import { encodeCommand, override, parseServerEvent } from "./protocol";
import type { StickSample } from "./joystick";
import { OverrideThrottle, joystickToCommand } from "./joystick";
import type { ConsoleEvent } from "./state";
import { applyEvent, initialState, isStale } from "./state";
import type { DecodedFrame } from "./render";
import { drawDashboard } from "./render";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d");
if (ctx === null) throw new Error("2d canvas unavailable");

const urlInput = el<HTMLInputElement>("server-url");
const connectButton = el<HTMLButtonElement>("connect");
const connLabel = el<HTMLSpanElement>("conn");
const logPane = el<HTMLPreElement>("log");
const pad = el<HTMLDivElement>("pad");
const knob = el<HTMLDivElement>("knob");

let state = initialState();
let socket: WebSocket | null = null;
let decoded: DecodedFrame | null = null;
const throttle = new OverrideThrottle();

function dispatch(event: ConsoleEvent): void {
  state = applyEvent(state, event, Date.now());
}

function send(cmd: ClientCommand | null): void {
  if (cmd === null) return;
  if (socket !== null && socket.readyState === WebSocket.OPEN) {
    socket.send(encodeCommand(cmd));
  }
}

function decodeFrame(frame: FrameEvent): void {
  const img = new Image();
  img.onload = () => {
    if (decoded === null || frame.seq >= decoded.seq) {
      decoded = { seq: frame.seq, image: img };
    }
  };
  img.onerror = () => dispatch({ kind: "frame-decode-error", seq: frame.seq });
  img.src = "data:image/png;base64," + frame.pngBase64;
}

function connect(url: string): void {
  if (socket !== null) {
    try {
      socket.close();
    } catch {
      // already closing
    }
  }
  decoded = null;
  dispatch({ kind: "socket", status: "connecting" });
  const ws = new WebSocket(url);
  socket = ws;
  ws.onopen = () => dispatch({ kind: "socket", status: "open" });
  ws.onclose = () => {
    if (socket === ws) dispatch({ kind: "socket", status: "closed" });
  };
  ws.onmessage = (msg) => {
    const event = parseServerEvent(String(msg.data));
    dispatch(event);
    if (event.kind === "frame") decodeFrame(event);
  };
}

// ---- input: virtual joystick (pointer) + WASD keyboard mirror --------------

const heldKeys = new Set<string>();
let padStick: StickSample | null = null;

function keyboardStick(): StickSample {
  let x = 0;
  let y = 0;
  if (heldKeys.has("KeyW")) y += 1;
  if (heldKeys.has("KeyS")) y -= 1;
  if (heldKeys.has("KeyD")) x += 1;
  if (heldKeys.has("KeyA")) x -= 1;
  return { x, y };
}

function currentStick(): StickSample {
  if (padStick !== null) return padStick;
  return keyboardStick();
}

function inputEngaged(): boolean {
  return padStick !== null || heldKeys.size > 0;
}

let wasEngaged = false;

function pumpInput(): void {
  const engaged = inputEngaged();
  if (engaged) {
    send(throttle.submit(joystickToCommand(currentStick()), Date.now()));
  } else if (wasEngaged) {
    // Stick let go: request a hover instead of freezing the last deflection.
    send(throttle.submit(override(0, 0, 0, 0), Date.now()));
  }
  wasEngaged = engaged;
  positionKnob();
}

function positionKnob(): void {
  const stick = currentStick();
  const range = pad.clientWidth / 2 - knob.clientWidth / 2;
  knob.style.transform =
    `translate(${(stick.x * range).toFixed(0)}px, ${(-stick.y * range).toFixed(0)}px)`;
}

pad.addEventListener("pointerdown", (ev) => {
  pad.setPointerCapture(ev.pointerId);
  padStick = stickFromPointer(ev);
  pumpInput();
});
pad.addEventListener("pointermove", (ev) => {
  if (padStick === null) return;
  padStick = stickFromPointer(ev);
  pumpInput();
});
const endPad = (ev: PointerEvent) => {
  if (padStick === null) return;
  try {
    pad.releasePointerCapture(ev.pointerId);
  } catch {
    // capture already gone
  }
  padStick = null;
  pumpInput();
};
pad.addEventListener("pointerup", endPad);
pad.addEventListener("pointercancel", endPad);

function stickFromPointer(ev: PointerEvent): StickSample {
  const rect = pad.getBoundingClientRect();
  const radius = rect.width / 2;
  let x = (ev.clientX - (rect.left + radius)) / radius;
  let y = -(ev.clientY - (rect.top + radius)) / radius;
  const norm = Math.hypot(x, y);
  if (norm > 1) {
    x /= norm;
    y /= norm;
  }
  return { x, y };
}

const STICK_KEYS = new Set(["KeyW", "KeyA", "KeyS", "KeyD"]);

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (ev.code === "Space") {
    ev.preventDefault();
    if (!ev.repeat) send(throttle.submit(joystickToCommand({ x: 0, y: 0 }, { release: true }), Date.now()));
    return;
  }
  if (STICK_KEYS.has(ev.code)) {
    ev.preventDefault();
    heldKeys.add(ev.code);
    pumpInput();
  }
});
window.addEventListener("keyup", (ev) => {
  if (STICK_KEYS.has(ev.code)) {
    heldKeys.delete(ev.code);
    pumpInput();
  }
});

// While the stick is engaged, keep streaming the current sample at the tick
// rate; the throttle enforces the 15/s ceiling either way.
setInterval(() => {
  send(throttle.flushDue(Date.now()));
  if (inputEngaged()) pumpInput();
}, 25);

// ---- lifecycle buttons ------------------------------------------------------

function lifecycle(action: "takeoff" | "land" | "reset"): void {
  send(throttle.submit({ kind: "lifecycle", action }, Date.now()));
}

el<HTMLButtonElement>("takeoff").addEventListener("click", () => lifecycle("takeoff"));
el<HTMLButtonElement>("land").addEventListener("click", () => lifecycle("land"));
el<HTMLButtonElement>("reset").addEventListener("click", () => lifecycle("reset"));
el<HTMLButtonElement>("release").addEventListener("click", () => {
  send(throttle.submit({ kind: "release" }, Date.now()));
});

connectButton.addEventListener("click", () => connect(urlInput.value.trim()));

// Safety default: a zero override goes out before the page goes away, so an
// abandoned console never leaves a deflected stick in force.
window.addEventListener("pagehide", () => {
  if (socket !== null && socket.readyState === WebSocket.OPEN) {
    socket.send(encodeCommand(override(0, 0, 0, 0)));
  }
});

// ---- paint loop -------------------------------------------------------------

function paint(): void {
  const now = Date.now();
  drawDashboard(ctx as CanvasRenderingContext2D, state, decoded, now);
  connLabel.textContent = isStale(state, now) ? `${state.connection} (stale)` : state.connection;
  const tail = state.infoLog.slice(-8).join("\n");
  if (logPane.textContent !== tail) logPane.textContent = tail;
  requestAnimationFrame(paint);
}

requestAnimationFrame(paint);
