// Wire protocol: one JSON object per line with type/seq/t/payload.
// Mirrors the service contract exactly; anything else is a ProtocolError.

export const PROTOCOL_VERSION = 1;

export const MESSAGE_TYPES = [
  "frame",
  "features",
  "prediction",
  "command",
  "telemetry",
  "cue",
  "training_control",
  "session_control",
  "error",
  "ack",
] as const;

export type MessageType = (typeof MESSAGE_TYPES)[number];

export interface WireMessage {
  type: MessageType;
  seq: number;
  t: number;
  payload: Record<string, unknown>;
}

export class ProtocolError extends Error {}

export function decodeMsg(line: string): WireMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (e) {
    throw new ProtocolError(`invalid JSON: ${(e as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const d = doc as Record<string, unknown>;
  for (const key of ["type", "seq", "t", "payload"]) {
    if (!(key in d)) throw new ProtocolError(`missing key: ${key}`);
  }
  if (typeof d.type !== "string" || !(MESSAGE_TYPES as readonly string[]).includes(d.type)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(d.type)}`);
  }
  if (typeof d.seq !== "number" || !Number.isInteger(d.seq) || d.seq < 0) {
    throw new ProtocolError(`seq must be a non-negative integer, got ${d.seq}`);
  }
  if (typeof d.t !== "number" || !Number.isFinite(d.t)) {
    throw new ProtocolError(`t must be a finite number, got ${d.t}`);
  }
  if (typeof d.payload !== "object" || d.payload === null || Array.isArray(d.payload)) {
    throw new ProtocolError("payload must be an object");
  }
  return {
    type: d.type as MessageType,
    seq: d.seq,
    t: d.t,
    payload: d.payload as Record<string, unknown>,
  };
}

export function encodeMsg(msg: WireMessage): string {
  return (
    JSON.stringify({ type: msg.type, seq: msg.seq, t: msg.t, payload: msg.payload }) + "\n"
  );
}

export function isHello(msg: WireMessage): boolean {
  return msg.type === "ack" && msg.payload["hello"] === true;
}

export function helloVersion(msg: WireMessage): number | null {
  if (!isHello(msg)) return null;
  const v = msg.payload["v"];
  return typeof v === "number" ? v : null;
}

// Typed payload views (narrowing helpers; the service is the source of truth).

export interface TelemetryPayload {
  x: number;
  y: number;
  heading_deg: number;
  velocity_mps: number;
  mode: string;
  collided: boolean;
}

export function asTelemetry(p: Record<string, unknown>): TelemetryPayload | null {
  if (
    typeof p.x === "number" &&
    typeof p.y === "number" &&
    typeof p.heading_deg === "number" &&
    typeof p.velocity_mps === "number" &&
    typeof p.mode === "string" &&
    typeof p.collided === "boolean"
  ) {
    return p as unknown as TelemetryPayload;
  }
  return null;
}

export interface PredictionPayload {
  label: string;
  confidences: number[];
  t_start: number;
  t_end: number;
}

export function asPrediction(p: Record<string, unknown>): PredictionPayload | null {
  if (
    typeof p.label === "string" &&
    Array.isArray(p.confidences) &&
    p.confidences.every((c) => typeof c === "number")
  ) {
    return p as unknown as PredictionPayload;
  }
  return null;
}

export interface CuePayload {
  label: string;
  event: "start" | "stop";
  trial: number;
  total: number;
  duration_s?: number;
}

export function asCue(p: Record<string, unknown>): CuePayload | null {
  if (
    typeof p.label === "string" &&
    (p.event === "start" || p.event === "stop") &&
    typeof p.trial === "number" &&
    typeof p.total === "number"
  ) {
    return p as unknown as CuePayload;
  }
  return null;
}

export const CLASS_LABELS = ["Neutral", "Push", "Pull", "Left", "Right"] as const;
export const DRIVE_COMMANDS = ["Forward", "Backward", "TurnLeft", "TurnRight", "Stop"] as const;
export type DriveCommand = (typeof DRIVE_COMMANDS)[number];
