/**
 * Dashboard painting: latest camera frame with the five-region detection
 * overlay, per-region magnitude bars, and a HUD line.
 *
 * The detector pools flow magnitudes over five equal-width vertical strips
 * spanning the full image; the overlay mirrors that geometry. A steering
 * signal of -1 means "obstacle on the left", so the two left strips light
 * up; +1 lights the two right strips.
 *
 * Geometry and bar scaling are pure functions so they can be unit-tested
 * without a canvas; `drawDashboard` is the thin painting shell around them.
 */

import type { ConsoleState } from "./state";
import { isStale } from "./state";

export const N_REGIONS = 5;
/** Pooled magnitude (px) that renders as a full bar. */
export const BAR_FULL_SCALE = 6.0;
/** Fraction of the bar lane a zero stat still shows, so empty != missing. */
export const BAR_BASELINE_FRACTION = 0.06;

export interface RegionRect {
  x: number;
  width: number;
}

/** The five equal vertical strips over a view of the given width. */
export function regionRects(width: number): RegionRect[] {
  const rects: RegionRect[] = [];
  for (let i = 0; i < N_REGIONS; i++) {
    const x0 = (i * width) / N_REGIONS;
    const x1 = ((i + 1) * width) / N_REGIONS;
    rects.push({ x: x0, width: x1 - x0 });
  }
  return rects;
}

/** Region indices highlighted for a steering signal. */
export function highlightedRegions(signal: -1 | 0 | 1): number[] {
  if (signal === -1) return [0, 1];
  if (signal === 1) return [3, 4];
  return [];
}

/**
 * Bar heights in pixels for the five pooled region stats.
 *
 * Zero (or missing) stats sit at the baseline height; positive stats grow
 * linearly and saturate at `maxHeight` when they reach BAR_FULL_SCALE.
 */
export function barHeights(stats: number[], maxHeight: number): number[] {
  const baseline = maxHeight * BAR_BASELINE_FRACTION;
  const heights: number[] = [];
  for (let i = 0; i < N_REGIONS; i++) {
    const stat = Number.isFinite(stats[i]) ? Math.max(0, stats[i]) : 0;
    const fill = Math.min(1, stat / BAR_FULL_SCALE);
    heights.push(baseline + fill * (maxHeight - baseline));
  }
  return heights;
}

export function signalGlyph(signal: -1 | 0 | 1): string {
  if (signal === -1) return "<< left";
  if (signal === 1) return "right >>";
  return "--";
}

export function hudLine(state: ConsoleState): string {
  const pose = state.pose;
  return (
    `mode ${state.mode}  signal ${signalGlyph(state.signal)}  ` +
    `alt ${pose.z.toFixed(1)}m  battery ${state.battery.toFixed(0)}%  ` +
    `proc ${state.processingMs.toFixed(1)}ms`
  );
}

export interface DecodedFrame {
  seq: number;
  image: CanvasImageSource;
}

function banner(
  ctx: CanvasRenderingContext2D,
  width: number,
  text: string,
  color: string,
): void {
  ctx.save();
  ctx.fillStyle = color;
  ctx.fillRect(0, 0, width, 28);
  ctx.fillStyle = "#fff";
  ctx.font = "bold 16px system-ui, sans-serif";
  ctx.textBaseline = "middle";
  ctx.fillText(text, 10, 14);
  ctx.restore();
}

export function drawDashboard(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  decoded: DecodedFrame | null,
  nowMs: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14171c";
  ctx.fillRect(0, 0, width, height);

  if (decoded !== null) {
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(decoded.image, 0, 0, width, height);
  } else {
    ctx.fillStyle = "#5c6470";
    ctx.font = "16px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("no video feed", width / 2, height / 2);
    ctx.textAlign = "left";
  }

  // Region strips: boundaries, signal highlight, magnitude bars.
  const rects = regionRects(width);
  const highlight = new Set(highlightedRegions(state.signal));
  const barLane = Math.round(height * 0.22);
  const heights = barHeights(state.regions, barLane - 8);

  for (let i = 0; i < rects.length; i++) {
    const r = rects[i];
    if (highlight.has(i)) {
      ctx.fillStyle = "rgba(255, 96, 64, 0.28)";
      ctx.fillRect(r.x, 0, r.width, height);
    }
    if (i > 0) {
      ctx.strokeStyle = "rgba(255, 255, 255, 0.45)";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(r.x + 0.5, 0);
      ctx.lineTo(r.x + 0.5, height);
      ctx.stroke();
    }
    const barWidth = r.width * 0.5;
    const barX = r.x + (r.width - barWidth) / 2;
    const h = heights[i];
    ctx.fillStyle = highlight.has(i) ? "rgba(255, 120, 90, 0.9)" : "rgba(120, 200, 255, 0.85)";
    ctx.fillRect(barX, height - 6 - h, barWidth, h);
  }

  // HUD.
  ctx.fillStyle = "rgba(0, 0, 0, 0.55)";
  ctx.fillRect(0, height - 30, width, 30);
  ctx.fillStyle = "#e8edf4";
  ctx.font = "13px ui-monospace, monospace";
  ctx.textBaseline = "middle";
  ctx.fillText(hudLine(state), 8, height - 15);

  if (state.lastFrameBad) {
    ctx.fillStyle = "#c0392b";
    ctx.fillRect(width - 150, 36, 142, 24);
    ctx.fillStyle = "#fff";
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText(`frame decode error (${state.decodeFailures})`, width - 144, 48);
  }

  if (state.connection === "closed" || state.connection === "idle") {
    banner(ctx, width, "DISCONNECTED", "#8e2f2f");
  } else if (isStale(state, nowMs)) {
    const silent = state.lastEventAtMs === null ? 0 : (nowMs - state.lastEventAtMs) / 1000;
    banner(ctx, width, `STALE — no events for ${silent.toFixed(1)}s`, "#a46a1f");
  }
}
