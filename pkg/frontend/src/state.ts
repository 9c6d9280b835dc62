/**
 * Console state: a pure projection of the events received so far.
 *
 * `applyEvent` never mutates its input and depends only on (state, event,
 * timestamp), so replaying the same event sequence reproduces the same view
 * — reconnect-safe by construction. Staleness is derived, not stored: it is
 * a function of the current clock and the last event time, so the flag
 * appears and clears without any event traffic.
 *
 * PNG decoding happens outside the store (it is async and needs the DOM);
 * the store only records decode failures reported back as local events, so
 * the error badge is part of the same projection.
 */

import type { FrameEvent, Pose, ServerEvent, Twist } from "./protocol";

export const STALE_AFTER_MS = 2000;
export const INFO_LOG_LIMIT = 50;

export type ConnectionStatus = "idle" | "connecting" | "open" | "closed";

export type LocalEvent =
  | { kind: "socket"; status: ConnectionStatus }
  | { kind: "frame-decode-error"; seq: number };

export type ConsoleEvent = ServerEvent | LocalEvent;

export interface ConsoleState {
  connection: ConnectionStatus;
  /** Wall-clock ms of the last server event (or connection open). */
  lastEventAtMs: number | null;
  /** Latest frame event received, decoded or not. */
  frame: FrameEvent | null;
  /** Highest frame seq seen this session; -1 before the first frame. */
  frameSeq: number;
  /** Frames whose seq did not increase — server invariant violations. */
  seqRegressions: number;
  /** True while the newest frame failed to decode (badge on). */
  lastFrameBad: boolean;
  decodeFailures: number;
  mode: string;
  signal: -1 | 0 | 1;
  regions: number[];
  pose: Pose;
  battery: number;
  processingMs: number;
  twist: Twist | null;
  /** Most recent info texts, newest last, capped at INFO_LOG_LIMIT. */
  infoLog: string[];
}

export function initialState(): ConsoleState {
  return {
    connection: "idle",
    lastEventAtMs: null,
    frame: null,
    frameSeq: -1,
    seqRegressions: 0,
    lastFrameBad: false,
    decodeFailures: 0,
    mode: "disconnected",
    signal: 0,
    regions: [0, 0, 0, 0, 0],
    pose: { x: 0, y: 0, z: 0, yaw: 0 },
    battery: 0,
    processingMs: 0,
    twist: null,
    infoLog: [],
  };
}

export function applyEvent(
  state: ConsoleState,
  event: ConsoleEvent,
  nowMs: number,
): ConsoleState {
  switch (event.kind) {
    case "socket": {
      if (event.status === "open") {
        // Fresh session: seq restarts server-side and the old feed is gone.
        return { ...initialState(), connection: "open", lastEventAtMs: nowMs };
      }
      return { ...state, connection: event.status };
    }
    case "frame": {
      const regressed = event.seq <= state.frameSeq;
      return {
        ...state,
        lastEventAtMs: nowMs,
        frame: event,
        frameSeq: Math.max(state.frameSeq, event.seq),
        seqRegressions: state.seqRegressions + (regressed ? 1 : 0),
        lastFrameBad: false,
      };
    }
    case "state": {
      return {
        ...state,
        lastEventAtMs: nowMs,
        mode: event.mode,
        signal: event.signal,
        regions: [...event.regions],
        pose: { ...event.pose },
        battery: event.battery,
        processingMs: event.processingMs,
        twist: event.twist === null ? null : [...event.twist],
      };
    }
    case "info": {
      const infoLog = [...state.infoLog, event.text].slice(-INFO_LOG_LIMIT);
      return { ...state, lastEventAtMs: nowMs, infoLog };
    }
    case "frame-decode-error": {
      // Only the newest frame can flip the badge on; a stale decode failing
      // after a newer frame arrived is already superseded.
      const isCurrent = state.frame !== null && state.frame.seq === event.seq;
      return {
        ...state,
        decodeFailures: state.decodeFailures + 1,
        lastFrameBad: isCurrent ? true : state.lastFrameBad,
      };
    }
  }
}

/** True when the session is open but silent for more than STALE_AFTER_MS. */
export function isStale(state: ConsoleState, nowMs: number): boolean {
  if (state.connection !== "open" || state.lastEventAtMs === null) {
    return false;
  }
  return nowMs - state.lastEventAtMs > STALE_AFTER_MS;
}
