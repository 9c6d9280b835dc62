/**
 * Live round-trip against a served simulation.
 *
 * Spawns the Python CLI in serve mode, connects over the real WebSocket, and
 * walks the full operator sequence: takeoff, a two-second burst of frame and
 * state events (at least ten of each), then a zero override that must show up
 * as a zero-twist override-hover state within two control ticks (plus a small
 * allowance for states already in flight when the override is sent).
 */

import { type ChildProcess, spawn } from "node:child_process";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import type { ServerEvent, StateEvent } from "../src/protocol";
import { encodeCommand, override, parseServerEvent } from "../src/protocol";

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");
const STARTUP_TIMEOUT_MS = 90_000;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close(() => reject(new Error("no port assigned")));
        return;
      }
      const port = address.port;
      probe.close(() => resolve(port));
    });
  });
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function connectOnce(url: string): Promise<WebSocket> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    ws.once("open", () => resolve(ws));
    ws.once("error", (err) => reject(err));
  });
}

async function connectWithRetry(url: string, deadlineMs: number): Promise<WebSocket> {
  const giveUpAt = Date.now() + deadlineMs;
  let lastError: unknown = null;
  while (Date.now() < giveUpAt) {
    try {
      return await connectOnce(url);
    } catch (err) {
      lastError = err;
      await sleep(400);
    }
  }
  throw new Error(`server never became reachable at ${url}: ${String(lastError)}`);
}

/** Accumulates parsed server events and lets tests await new arrivals. */
class EventStream {
  readonly events: ServerEvent[] = [];
  private waiters: Array<() => void> = [];

  constructor(ws: WebSocket) {
    ws.on("message", (data) => {
      this.events.push(parseServerEvent(data.toString()));
      for (const wake of this.waiters.splice(0)) wake();
    });
  }

  /** Wait until more than `count` events have arrived or the timeout passes. */
  async waitBeyond(count: number, timeoutMs: number): Promise<boolean> {
    const giveUpAt = Date.now() + timeoutMs;
    while (this.events.length <= count) {
      const remaining = giveUpAt - Date.now();
      if (remaining <= 0) return false;
      await new Promise<void>((resolve) => {
        const timer = setTimeout(resolve, remaining);
        this.waiters.push(() => {
          clearTimeout(timer);
          resolve();
        });
      });
    }
    return true;
  }
}

let server: ChildProcess | null = null;
let serverStderr = "";
let ws: WebSocket | null = null;
let stream: EventStream | null = null;

beforeAll(async () => {
  const port = await freePort();
  server = spawn(
    "python3",
    [
      "-m",
      "flownav.cli",
      "serve",
      "--scenario",
      "scenarios/empty.json",
      "--config",
      "configs/lowres.json",
      "--port",
      String(port),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "ignore", "pipe"] },
  );
  server.stderr?.on("data", (chunk: Buffer) => {
    serverStderr += chunk.toString();
  });
  const exitedEarly = new Promise<never>((_, reject) => {
    server?.once("exit", (code) => {
      reject(new Error(`server exited during startup (code ${code}):\n${serverStderr}`));
    });
  });
  ws = await Promise.race([
    connectWithRetry(`ws://127.0.0.1:${port}/ws`, STARTUP_TIMEOUT_MS),
    exitedEarly,
  ]);
  server.removeAllListeners("exit");
  stream = new EventStream(ws);
});

afterAll(async () => {
  ws?.close();
  if (server !== null && server.exitCode === null) {
    server.kill("SIGTERM");
    const gone = new Promise<void>((resolve) => server?.once("exit", () => resolve()));
    await Promise.race([gone, sleep(5000)]);
    if (server.exitCode === null) server.kill("SIGKILL");
  }
});

describe("operator round-trip against a served sim", () => {
  it(
    "streams >=10 frames and states in 2s after takeoff, then honors a zero override within 2 ticks",
    { timeout: 60_000 },
    async () => {
      if (ws === null || stream === null) throw new Error("no live session");

      // The registration snapshot arrives on its own; grounded, nothing moving.
      expect(await stream.waitBeyond(0, 10_000)).toBe(true);
      const snapshot = stream.events[0];
      expect(snapshot.kind).toBe("state");

      // Take off and count what the server pushes in the next two seconds.
      const countFrom = stream.events.length;
      ws.send(encodeCommand({ kind: "lifecycle", action: "takeoff" }));
      await sleep(2000);
      const burst = stream.events.slice(countFrom);
      const frames = burst.filter((e) => e.kind === "frame");
      const states = burst.filter((e): e is StateEvent => e.kind === "state");
      expect(frames.length).toBeGreaterThanOrEqual(10);
      expect(states.length).toBeGreaterThanOrEqual(10);

      // The feed is real PNG data.
      const firstFrame = frames[0];
      if (firstFrame.kind !== "frame") throw new Error("unreachable");
      const magic = Buffer.from(firstFrame.pngBase64, "base64").subarray(0, 4);
      expect([...magic]).toEqual([0x89, 0x50, 0x4e, 0x47]);

      // And the takeoff actually happened: the drone is climbing.
      const lastState = states[states.length - 1];
      expect(lastState.mode).toBe("taking_off");
      expect(lastState.pose.z).toBeGreaterThan(0.5);

      // Zero override: the next states must show override-hover with zero
      // twist. Two control ticks is the contract; two more states of grace
      // cover whatever was already in flight when the send happened.
      const overrideFrom = stream.events.length;
      ws.send(encodeCommand(override(0, 0, 0, 0)));
      const postStates: StateEvent[] = [];
      const deadline = Date.now() + 5000;
      let scanned = overrideFrom;
      while (postStates.length < 4 && Date.now() < deadline) {
        await stream.waitBeyond(scanned, Math.max(1, deadline - Date.now()));
        for (; scanned < stream.events.length; scanned++) {
          const event = stream.events[scanned];
          if (event.kind === "state") postStates.push(event);
          if (postStates.length >= 4) break;
        }
      }
      const hovering = postStates.findIndex(
        (s) =>
          s.mode === "hovering:override" &&
          s.twist !== null &&
          s.twist.every((v) => v === 0),
      );
      expect(hovering).toBeGreaterThanOrEqual(0);
      expect(hovering).toBeLessThan(4);
    },
  );
});
