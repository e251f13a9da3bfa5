// Pure render models: everything the canvas/DOM layer draws is computed here
// from session state, so it can be unit-tested without a browser.

import { CLASS_LABELS } from "./protocol.js";
import { ConsoleSession } from "./session.js";

export interface Bar {
  label: string;
  value: number; // 0..1 for confidences, normalized for band powers
  aboveThreshold?: boolean;
}

export interface ConfidencePanel {
  bars: Bar[];
  threshold: number;
  topLabel: string | null;
  stale: boolean;
}

export function confidencePanel(session: ConsoleSession, threshold: number): ConfidencePanel {
  const last = session.predictions.last();
  const bars: Bar[] = CLASS_LABELS.map((label, i) => {
    const value = last ? (last.value.confidences[i] ?? 0) : 0;
    return { label, value, aboveThreshold: value >= threshold };
  });
  return {
    bars,
    threshold,
    topLabel: last ? last.value.label : null,
    stale: session.isStale("prediction"),
  };
}

export interface BandPowerPanel {
  // one row per channel, one normalized cell per band (log-power mapped to 0..1)
  rows: { channel: string; cells: number[] }[];
  stale: boolean;
}

// typical log10 band-power range for the synthetic sessions
const LOG_POWER_MIN = -3;
const LOG_POWER_MAX = 3;

export function normalizeLogPower(v: number): number {
  const x = (v - LOG_POWER_MIN) / (LOG_POWER_MAX - LOG_POWER_MIN);
  return Math.max(0, Math.min(1, x));
}

export function bandPowerPanel(session: ConsoleSession, channels: string[]): BandPowerPanel {
  const last = session.features.last();
  const rows = channels.map((channel, i) => ({
    channel,
    cells: last ? (last.value[i] ?? []).map(normalizeLogPower) : [],
  }));
  return { rows, stale: session.isStale("features") };
}

export interface ChairGlyph {
  x: number;
  y: number;
  /** canvas rotation in radians; heading 0 points up (+y), clockwise-positive */
  rotationRad: number;
  mode: string;
  collided: boolean;
  stale: boolean;
  trail: readonly { x: number; y: number }[];
}

export function chairGlyph(session: ConsoleSession): ChairGlyph | null {
  const last = session.telemetry.last();
  if (!last) return null;
  return {
    x: last.value.x,
    y: last.value.y,
    rotationRad: (last.value.heading_deg * Math.PI) / 180,
    mode: last.value.mode,
    collided: last.value.collided,
    stale: session.isStale("telemetry"),
    trail: session.trail.toArray(),
  };
}

/** World (x up-ish) to canvas pixels: +x right, +y UP on screen. */
export function worldToCanvas(
  x: number,
  y: number,
  bounds: { xMin: number; yMin: number; xMax: number; yMax: number },
  widthPx: number,
  heightPx: number,
): { px: number; py: number } {
  const sx = widthPx / (bounds.xMax - bounds.xMin);
  const sy = heightPx / (bounds.yMax - bounds.yMin);
  return { px: (x - bounds.xMin) * sx, py: heightPx - (y - bounds.yMin) * sy };
}

export interface CueCard {
  label: string;
  trial: number;
  total: number;
  /** 0..1 progress through the current trial, when duration is known */
  progress: number | null;
}

export function cueCard(session: ConsoleSession, nowMs: number): CueCard | null {
  const cue = session.training.activeCue;
  if (!cue) return null;
  let progress: number | null = null;
  if (cue.duration_s && session.training.cueStartedAtMs !== null) {
    progress = Math.max(
      0,
      Math.min(1, (nowMs - session.training.cueStartedAtMs) / (cue.duration_s * 1000)),
    );
  }
  return { label: cue.label, trial: cue.trial, total: cue.total, progress };
}

export interface StatusLine {
  text: string;
  kind: "ok" | "warn" | "error";
}

export function connectionStatus(session: ConsoleSession): StatusLine {
  const c = session.connection;
  switch (c.kind) {
    case "connected":
      return { text: `connected (protocol v${c.helloVersion})`, kind: "ok" };
    case "connecting":
      return { text: "connecting…", kind: "warn" };
    case "retrying":
      return {
        text: `retrying (attempt ${c.attempt + 1}, next in ${(c.retryInMs / 1000).toFixed(1)} s)`,
        kind: "warn",
      };
    case "version_mismatch":
      return { text: `protocol version mismatch (service v${c.got})`, kind: "error" };
    default:
      return { text: "disconnected", kind: "error" };
  }
}
