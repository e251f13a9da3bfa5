// ConsoleSession: all UI state, derived solely from received WireMessages.
// Bounded ring buffers (~60 s at the default rates); out-of-order seqs are
// flagged, never reordered.

import {
  CuePayload,
  PredictionPayload,
  TelemetryPayload,
  WireMessage,
  asCue,
  asPrediction,
  asTelemetry,
  helloVersion,
  isHello,
  PROTOCOL_VERSION,
} from "./protocol.js";

export type ConnectionState =
  | { kind: "disconnected" }
  | { kind: "connecting" }
  | { kind: "retrying"; attempt: number; retryInMs: number }
  | { kind: "connected"; helloVersion: number }
  | { kind: "version_mismatch"; got: number };

export interface Stamped<T> {
  seq: number;
  t: number;
  receivedAtMs: number;
  value: T;
}

export interface TrainingReport {
  accuracy: number;
  per_class_accuracy: Record<string, number>;
  confusion: number[][];
  k_folds: number;
}

export interface TrainingState {
  phase: "idle" | "running" | "complete" | "aborted";
  activeCue: CuePayload | null;
  cueStartedAtMs: number | null;
  report: TrainingReport | null;
}

export interface LogEntry {
  atMs: number;
  text: string;
  level: "info" | "error";
}

// feature rows arrive ~4/s, predictions ~4/s, telemetry up to 20/s
const FEATURE_CAP = 240; // ~60 s
const PREDICTION_CAP = 240;
const TELEMETRY_CAP = 1200;
const TRAIL_CAP = 600;
const LOG_CAP = 200;

export class RingBuffer<T> {
  private items: T[] = [];
  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("ring buffer capacity must be >= 1");
  }
  push(item: T): void {
    this.items.push(item);
    if (this.items.length > this.capacity) this.items.shift();
  }
  get length(): number {
    return this.items.length;
  }
  last(): T | undefined {
    return this.items[this.items.length - 1];
  }
  toArray(): readonly T[] {
    return this.items;
  }
}

export class ConsoleSession {
  connection: ConnectionState = { kind: "disconnected" };
  features = new RingBuffer<Stamped<number[][]>>(FEATURE_CAP);
  predictions = new RingBuffer<Stamped<PredictionPayload>>(PREDICTION_CAP);
  telemetry = new RingBuffer<Stamped<TelemetryPayload>>(TELEMETRY_CAP);
  trail = new RingBuffer<{ x: number; y: number }>(TRAIL_CAP);
  log: LogEntry[] = [];
  training: TrainingState = {
    phase: "idle",
    activeCue: null,
    cueStartedAtMs: null,
    report: null,
  };
  lastCommand: Stamped<Record<string, unknown>> | null = null;
  outOfOrder: Record<string, number> = {};
  private lastSeq: Record<string, number> = {};

  constructor(private readonly now: () => number = () => Date.now()) {}

  get connected(): boolean {
    return this.connection.kind === "connected";
  }

  onOpen(): void {
    this.connection = { kind: "connecting" };
  }

  onRetry(attempt: number, retryInMs: number): void {
    this.connection = { kind: "retrying", attempt, retryInMs };
  }

  onClose(): void {
    if (this.connection.kind !== "version_mismatch") {
      this.connection = { kind: "disconnected" };
    }
  }

  /** Route one received message into the session state. */
  onMessage(msg: WireMessage): void {
    const atMs = this.now();
    const prev = this.lastSeq[msg.type];
    if (prev !== undefined && msg.seq <= prev) {
      this.outOfOrder[msg.type] = (this.outOfOrder[msg.type] ?? 0) + 1;
      return; // flagged, never rendered out of order
    }
    this.lastSeq[msg.type] = msg.seq;

    if (isHello(msg)) {
      const v = helloVersion(msg);
      if (v === PROTOCOL_VERSION) {
        this.connection = { kind: "connected", helloVersion: v };
        this.pushLog(atMs, `connected (protocol v${v})`, "info");
      } else {
        this.connection = { kind: "version_mismatch", got: v ?? -1 };
        this.pushLog(atMs, `protocol version mismatch: service v${v}`, "error");
      }
      return;
    }

    switch (msg.type) {
      case "telemetry": {
        const tele = asTelemetry(msg.payload);
        if (tele) {
          this.telemetry.push({ seq: msg.seq, t: msg.t, receivedAtMs: atMs, value: tele });
          const prevTrail = this.trail.last();
          if (!prevTrail || prevTrail.x !== tele.x || prevTrail.y !== tele.y) {
            this.trail.push({ x: tele.x, y: tele.y });
          }
        }
        break;
      }
      case "features": {
        const values = msg.payload["values"];
        if (Array.isArray(values)) {
          this.features.push({
            seq: msg.seq,
            t: msg.t,
            receivedAtMs: atMs,
            value: values as number[][],
          });
        }
        break;
      }
      case "prediction": {
        const pred = asPrediction(msg.payload);
        if (pred) {
          this.predictions.push({ seq: msg.seq, t: msg.t, receivedAtMs: atMs, value: pred });
        }
        break;
      }
      case "command": {
        this.lastCommand = { seq: msg.seq, t: msg.t, receivedAtMs: atMs, value: msg.payload };
        this.pushLog(atMs, `command ${msg.payload["command"]} (${msg.payload["source"]})`, "info");
        break;
      }
      case "cue": {
        const cue = asCue(msg.payload);
        if (cue) {
          if (cue.event === "start") {
            this.training.phase = "running";
            this.training.activeCue = cue;
            this.training.cueStartedAtMs = atMs;
          } else if (this.training.activeCue?.trial === cue.trial) {
            this.training.activeCue = null;
          }
        }
        break;
      }
      case "training_control": {
        if (msg.payload["action"] === "complete") {
          this.training.phase = "complete";
          this.training.activeCue = null;
          this.training.report = (msg.payload["report"] ?? null) as TrainingReport | null;
          this.pushLog(atMs, "training complete", "info");
        }
        break;
      }
      case "error": {
        this.pushLog(atMs, `service error: ${msg.payload["reason"]}`, "error");
        break;
      }
      case "ack": {
        if (msg.payload["training"] === "started") this.training.phase = "running";
        if (msg.payload["training"] === "aborted") {
          this.training.phase = "aborted";
          this.training.activeCue = null;
        }
        break;
      }
      default:
        break;
    }
  }

  /** Milliseconds since the last message of the given type, or Infinity. */
  staleness(type: "telemetry" | "features" | "prediction"): number {
    const buf =
      type === "telemetry" ? this.telemetry : type === "features" ? this.features : this.predictions;
    const last = buf.last();
    return last ? this.now() - last.receivedAtMs : Infinity;
  }

  isStale(type: "telemetry" | "features" | "prediction", thresholdMs = 2000): boolean {
    return this.staleness(type) > thresholdMs;
  }

  private pushLog(atMs: number, text: string, level: "info" | "error"): void {
    this.log.push({ atMs, text, level });
    if (this.log.length > LOG_CAP) this.log.shift();
  }
}
