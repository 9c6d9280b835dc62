/**
 * Virtual joystick: turn stick samples and buttons into client commands.
 *
 * Axis convention (matches the flight frame): pushing the stick forward is
 * +y on the stick and maps to +linear_x (fly forward); pushing right is +x
 * on the stick and maps to +linear_y (fly right). Deflections inside the
 * dead zone still emit an override — a held stick near center means "hover
 * under manual control", not "resume autonomy". Autonomy resumes only via
 * the dedicated release button.
 *
 * OverrideThrottle keeps the override rate at or below the control tick
 * (15 Hz) no matter how fast input events arrive, always preferring the
 * newest sample. Lifecycle and release commands are never delayed; they also
 * cancel any held-back override so a stale stick sample cannot undo them.
 */

import type { ClientCommand, OverrideCommand } from "./protocol";
import { clampAxis, override } from "./protocol";

export const DEAD_ZONE_RADIUS = 0.1;
export const MAX_OVERRIDES_PER_SECOND = 15;

export interface StickSample {
  /** Right is positive, in [-1, 1]. */
  x: number;
  /** Push forward is positive, in [-1, 1]. */
  y: number;
}

export interface JoystickButtons {
  release?: boolean;
}

/**
 * Map one input sample to a command.
 *
 * Release button wins over any stick deflection. A stick inside the
 * dead-zone radius yields the all-zero override (hover); outside it the
 * deflection maps to normalized linear_x/linear_y.
 */
export function joystickToCommand(
  stick: StickSample,
  buttons: JoystickButtons = {},
): ClientCommand {
  if (buttons.release) {
    return { kind: "release" };
  }
  const x = clampAxis(stick.x);
  const y = clampAxis(stick.y);
  if (Math.hypot(x, y) < DEAD_ZONE_RADIUS) {
    return override(0, 0, 0, 0);
  }
  return override(y, x, 0, 0);
}

export class OverrideThrottle {
  private readonly minIntervalMs: number;
  private lastSentAtMs = -Infinity;
  private pending: OverrideCommand | null = null;

  constructor(maxPerSecond: number = MAX_OVERRIDES_PER_SECOND) {
    if (!(maxPerSecond > 0)) {
      throw new Error("maxPerSecond must be positive");
    }
    this.minIntervalMs = 1000 / maxPerSecond;
  }

  /**
   * Offer a command for sending at time `nowMs`.
   *
   * Returns the command if it may go out now, or null if it was held back.
   * Overrides inside the rate budget pass through; outside it the newest
   * one is parked for `flushDue`. Non-override commands always pass and
   * drop whatever override was parked.
   */
  submit(cmd: ClientCommand, nowMs: number): ClientCommand | null {
    if (cmd.kind !== "override") {
      this.pending = null;
      return cmd;
    }
    if (nowMs - this.lastSentAtMs >= this.minIntervalMs) {
      this.lastSentAtMs = nowMs;
      this.pending = null;
      return cmd;
    }
    this.pending = cmd;
    return null;
  }

  /** The parked override once the rate budget allows it again, else null. */
  flushDue(nowMs: number): OverrideCommand | null {
    if (this.pending === null || nowMs - this.lastSentAtMs < this.minIntervalMs) {
      return null;
    }
    const cmd = this.pending;
    this.pending = null;
    this.lastSentAtMs = nowMs;
    return cmd;
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }
}
