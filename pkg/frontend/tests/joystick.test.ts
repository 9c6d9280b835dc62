import { describe, expect, it } from "vitest";

import {
  DEAD_ZONE_RADIUS,
  MAX_OVERRIDES_PER_SECOND,
  OverrideThrottle,
  joystickToCommand,
} from "../src/joystick";
import type { OverrideCommand } from "../src/protocol";
import { override } from "../src/protocol";

function asOverride(cmd: ReturnType<typeof joystickToCommand>): OverrideCommand {
  if (cmd.kind !== "override") throw new Error(`expected override, got ${cmd.kind}`);
  return cmd;
}

describe("joystickToCommand", () => {
  it("maps full forward deflection to +linear_x", () => {
    const cmd = asOverride(joystickToCommand({ x: 0, y: 1 }));
    expect(cmd).toEqual({ kind: "override", x: 1, y: 0, z: 0, yaw: 0 });
  });

  it("maps rightward deflection to +linear_y", () => {
    const cmd = asOverride(joystickToCommand({ x: 1, y: 0 }));
    expect(cmd).toEqual({ kind: "override", x: 0, y: 1, z: 0, yaw: 0 });
  });

  it("maps pull-back to -linear_x and leftward to -linear_y", () => {
    expect(asOverride(joystickToCommand({ x: 0, y: -1 })).x).toBe(-1);
    expect(asOverride(joystickToCommand({ x: -0.5, y: 0 })).y).toBe(-0.5);
  });

  it("emits a hover override inside the dead zone", () => {
    const cmd = asOverride(joystickToCommand({ x: 0.05, y: 0.05 }));
    expect(cmd).toEqual({ kind: "override", x: 0, y: 0, z: 0, yaw: 0 });
  });

  it("uses a circular dead zone of radius 0.1", () => {
    // Just inside along one axis: 0.099 < 0.1.
    expect(asOverride(joystickToCommand({ x: 0.099, y: 0 })).y).toBe(0);
    // At the radius the deflection is live.
    expect(asOverride(joystickToCommand({ x: DEAD_ZONE_RADIUS, y: 0 })).y).toBe(
      DEAD_ZONE_RADIUS,
    );
    // Diagonal (0.08, 0.08) has norm ~0.113 > 0.1, so it is live too.
    const diag = asOverride(joystickToCommand({ x: 0.08, y: 0.08 }));
    expect(diag.x).toBeCloseTo(0.08);
    expect(diag.y).toBeCloseTo(0.08);
  });

  it("clamps out-of-range samples before mapping", () => {
    const cmd = asOverride(joystickToCommand({ x: 3, y: -7 }));
    expect(cmd).toEqual({ kind: "override", x: -1, y: 1, z: 0, yaw: 0 });
  });

  it("prefers the release button over any deflection", () => {
    expect(joystickToCommand({ x: 1, y: 1 }, { release: true })).toEqual({ kind: "release" });
    expect(joystickToCommand({ x: 0, y: 0 }, { release: true })).toEqual({ kind: "release" });
  });
});

describe("OverrideThrottle", () => {
  it("never passes more than 15 overrides in any one-second window", () => {
    const throttle = new OverrideThrottle();
    const sentAt: number[] = [];
    // Input events every 4 ms for 2 simulated seconds: 500 samples/s.
    for (let now = 0; now <= 2000; now += 4) {
      if (throttle.submit(override(0.5, 0, 0, 0), now) !== null) {
        sentAt.push(now);
      }
    }
    for (const start of sentAt) {
      const inWindow = sentAt.filter((t) => t >= start && t < start + 1000).length;
      expect(inWindow).toBeLessThanOrEqual(MAX_OVERRIDES_PER_SECOND);
    }
    // The limiter paces, it does not starve: the budget is nearly used.
    expect(sentAt.filter((t) => t < 1000).length).toBeGreaterThanOrEqual(14);
  });

  it("passes an override immediately when idle", () => {
    const throttle = new OverrideThrottle();
    expect(throttle.submit(override(1, 0, 0, 0), 1000)).not.toBeNull();
  });

  it("parks only the newest suppressed override for the next slot", () => {
    const throttle = new OverrideThrottle();
    expect(throttle.submit(override(0.1, 0, 0, 0), 0)).not.toBeNull();
    expect(throttle.submit(override(0.2, 0, 0, 0), 10)).toBeNull();
    expect(throttle.submit(override(0.3, 0, 0, 0), 20)).toBeNull();
    expect(throttle.flushDue(30)).toBeNull(); // budget not yet refilled
    const flushed = throttle.flushDue(70);
    expect(flushed).not.toBeNull();
    expect(flushed?.x).toBe(0.3); // latest sample wins
    expect(throttle.flushDue(200)).toBeNull(); // nothing left to flush
  });

  it("lets lifecycle and release commands through untouched", () => {
    const throttle = new OverrideThrottle();
    expect(throttle.submit(override(0.5, 0, 0, 0), 0)).not.toBeNull();
    // Immediately after an override — still passes, not rate limited.
    expect(throttle.submit({ kind: "release" }, 1)).toEqual({ kind: "release" });
    expect(throttle.submit({ kind: "lifecycle", action: "land" }, 2)).toEqual({
      kind: "lifecycle",
      action: "land",
    });
  });

  it("drops a parked override when a release supersedes it", () => {
    const throttle = new OverrideThrottle();
    throttle.submit(override(0.5, 0, 0, 0), 0);
    expect(throttle.submit(override(0.9, 0, 0, 0), 5)).toBeNull();
    expect(throttle.hasPending).toBe(true);
    throttle.submit({ kind: "release" }, 6);
    expect(throttle.hasPending).toBe(false);
    // The stale stick sample must not resurface after the release.
    expect(throttle.flushDue(500)).toBeNull();
  });
});
