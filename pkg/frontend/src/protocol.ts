/**
 * Wire protocol for the operator console.
 *
 * The server speaks JSON text frames over a single WebSocket. Three event
 * shapes arrive from the server:
 *
 *   {"type":"frame","seq":n,"t":s,"png":base64}
 *   {"type":"state","mode":str,"signal":-1|0|1,"regions":[5 numbers],
 *    "pose":{"x":f,"y":f,"z":f,"yaw":f},"battery":pct,"proc_ms":ms,
 *    "twist":[x,y,z,yaw]}
 *   {"type":"info","text":str}
 *
 * ("twist" is a server extension: the command held during the tick, in m/s
 * and rad/s. It may be absent from older servers, so it parses as optional.)
 *
 * Three command shapes go to the server:
 *
 *   {"type":"lifecycle","action":"takeoff"|"land"|"reset"}
 *   {"type":"override","x":f,"y":f,"z":f,"yaw":f}   components in [-1,1]
 *   {"type":"release"}
 *
 * Anything unparseable or of unknown type becomes an InfoEvent so the UI can
 * surface it without crashing — mirroring how the server ignores unknown
 * client messages with an info reply.
 */

export interface Pose {
  x: number;
  y: number;
  z: number;
  yaw: number;
}

export interface FrameEvent {
  kind: "frame";
  seq: number;
  t: number;
  pngBase64: string;
}

export type Twist = [number, number, number, number];

export interface StateEvent {
  kind: "state";
  mode: string;
  signal: -1 | 0 | 1;
  regions: number[];
  pose: Pose;
  battery: number;
  processingMs: number;
  twist: Twist | null;
}

export interface InfoEvent {
  kind: "info";
  text: string;
}

export type ServerEvent = FrameEvent | StateEvent | InfoEvent;

export type LifecycleAction = "takeoff" | "land" | "reset";

export interface LifecycleCommand {
  kind: "lifecycle";
  action: LifecycleAction;
}

export interface OverrideCommand {
  kind: "override";
  x: number;
  y: number;
  z: number;
  yaw: number;
}

export interface ReleaseCommand {
  kind: "release";
}

export type ClientCommand = LifecycleCommand | OverrideCommand | ReleaseCommand;

/** Clamp a normalized axis into [-1, 1]; anything non-finite becomes 0. */
export function clampAxis(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.max(-1, Math.min(1, value));
}

/** Build an OverrideCommand with every component clamped to [-1, 1]. */
export function override(x = 0, y = 0, z = 0, yaw = 0): OverrideCommand {
  return {
    kind: "override",
    x: clampAxis(x),
    y: clampAxis(y),
    z: clampAxis(z),
    yaw: clampAxis(yaw),
  };
}

export function isZeroOverride(cmd: OverrideCommand): boolean {
  return cmd.x === 0 && cmd.y === 0 && cmd.z === 0 && cmd.yaw === 0;
}

function info(text: string): InfoEvent {
  return { kind: "info", text };
}

function asFiniteNumber(value: unknown): number | null {
  return typeof value === "number" && Number.isFinite(value) ? value : null;
}

function parsePose(value: unknown): Pose | null {
  if (typeof value !== "object" || value === null) return null;
  const rec = value as Record<string, unknown>;
  const x = asFiniteNumber(rec.x);
  const y = asFiniteNumber(rec.y);
  const z = asFiniteNumber(rec.z);
  const yaw = asFiniteNumber(rec.yaw);
  if (x === null || y === null || z === null || yaw === null) return null;
  return { x, y, z, yaw };
}

function parseRegions(value: unknown): number[] | null {
  if (!Array.isArray(value) || value.length !== 5) return null;
  const out: number[] = [];
  for (const v of value) {
    const n = asFiniteNumber(v);
    if (n === null) return null;
    out.push(n);
  }
  return out;
}

function parseTwist(value: unknown): Twist | null {
  if (!Array.isArray(value) || value.length !== 4) return null;
  const parts = value.map(asFiniteNumber);
  if (parts.some((p) => p === null)) return null;
  return parts as Twist;
}

function parseFrame(rec: Record<string, unknown>): ServerEvent {
  const seq = asFiniteNumber(rec.seq);
  const t = asFiniteNumber(rec.t);
  const png = typeof rec.png === "string" ? rec.png : null;
  if (seq === null || t === null || png === null) {
    return info("ignored: frame event with missing fields");
  }
  return { kind: "frame", seq, t, pngBase64: png };
}

function parseState(rec: Record<string, unknown>): ServerEvent {
  const mode = typeof rec.mode === "string" ? rec.mode : null;
  const signal = asFiniteNumber(rec.signal);
  const regions = parseRegions(rec.regions);
  const pose = parsePose(rec.pose);
  const battery = asFiniteNumber(rec.battery);
  const procMs = asFiniteNumber(rec.proc_ms);
  if (
    mode === null ||
    signal === null ||
    !(signal === -1 || signal === 0 || signal === 1) ||
    regions === null ||
    pose === null ||
    battery === null ||
    procMs === null
  ) {
    return info("ignored: state event with missing fields");
  }
  return {
    kind: "state",
    mode,
    signal,
    regions,
    pose,
    battery,
    processingMs: procMs,
    twist: parseTwist(rec.twist),
  };
}

/**
 * Decode one raw text frame from the server into a ServerEvent.
 *
 * Never throws: malformed JSON, non-object payloads, unknown types, and
 * type-correct events with broken fields all come back as InfoEvents.
 */
export function parseServerEvent(raw: string): ServerEvent {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return info("ignored: malformed server message");
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    return info("ignored: server message must be an object");
  }
  const rec = data as Record<string, unknown>;
  switch (rec.type) {
    case "frame":
      return parseFrame(rec);
    case "state":
      return parseState(rec);
    case "info":
      return info(typeof rec.text === "string" ? rec.text : "");
    default:
      return info(`ignored: unknown event type ${JSON.stringify(rec.type)}`);
  }
}

/** Encode a command as the JSON text frame the server expects. */
export function encodeCommand(cmd: ClientCommand): string {
  switch (cmd.kind) {
    case "lifecycle":
      return JSON.stringify({ type: "lifecycle", action: cmd.action });
    case "override":
      return JSON.stringify({
        type: "override",
        x: clampAxis(cmd.x),
        y: clampAxis(cmd.y),
        z: clampAxis(cmd.z),
        yaw: clampAxis(cmd.yaw),
      });
    case "release":
      return JSON.stringify({ type: "release" });
  }
}
