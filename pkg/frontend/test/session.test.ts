import { describe, expect, it } from "vitest";

import { WireMessage } from "../src/protocol.js";
import { ConsoleSession, RingBuffer } from "../src/session.js";

function makeSession(): { session: ConsoleSession; tick: (ms: number) => void } {
  let now = 0;
  const session = new ConsoleSession(() => now);
  return { session, tick: (ms) => (now += ms) };
}

function msg(type: WireMessage["type"], seq: number, payload: Record<string, unknown>, t = 0): WireMessage {
  return { type, seq, t, payload };
}

const HELLO = msg("ack", 0, { hello: true, v: 1 });

function telemetry(seq: number, over: Partial<Record<string, unknown>> = {}): WireMessage {
  return msg("telemetry", seq, {
    x: 0, y: 0, heading_deg: 0, velocity_mps: 0, mode: "Idle", collided: false,
    ...over,
  });
}

describe("connection state", () => {
  it("hello with the right version connects", () => {
    const { session } = makeSession();
    session.onMessage(HELLO);
    expect(session.connection).toEqual({ kind: "connected", helloVersion: 1 });
  });

  it("hello with a different version is a blocking mismatch", () => {
    const { session } = makeSession();
    session.onMessage(msg("ack", 0, { hello: true, v: 99 }));
    expect(session.connection.kind).toBe("version_mismatch");
    session.onClose(); // dropping the socket must not hide the mismatch
    expect(session.connection.kind).toBe("version_mismatch");
  });

  it("retry state carries the countdown", () => {
    const { session } = makeSession();
    session.onRetry(2, 2000);
    expect(session.connection).toEqual({ kind: "retrying", attempt: 2, retryInMs: 2000 });
  });
});

describe("buffers", () => {
  it("ring buffers are bounded", () => {
    const buf = new RingBuffer<number>(3);
    for (let i = 0; i < 10; i++) buf.push(i);
    expect(buf.toArray()).toEqual([7, 8, 9]);
  });

  it("telemetry capped at ~60 s worth", () => {
    const { session } = makeSession();
    for (let i = 0; i < 5000; i++) session.onMessage(telemetry(i));
    expect(session.telemetry.length).toBeLessThanOrEqual(1200);
    expect(session.telemetry.last()?.seq).toBe(4999);
  });

  it("out-of-order seqs are flagged and not rendered", () => {
    const { session } = makeSession();
    session.onMessage(telemetry(5, { x: 1 }));
    session.onMessage(telemetry(3, { x: 99 })); // stale
    expect(session.outOfOrder["telemetry"]).toBe(1);
    expect(session.telemetry.last()?.value.x).toBe(1);
  });

  it("seq ordering is tracked per type", () => {
    const { session } = makeSession();
    session.onMessage(telemetry(10));
    session.onMessage(msg("prediction", 2, {
      label: "Push", confidences: [0.1, 0.6, 0.1, 0.1, 0.1], t_start: 0, t_end: 1,
    }));
    expect(session.outOfOrder["prediction"]).toBeUndefined();
    expect(session.predictions.last()?.value.label).toBe("Push");
  });
});

describe("staleness", () => {
  it("fresh feed is not stale, a 3 s pause is", () => {
    const { session, tick } = makeSession();
    session.onMessage(telemetry(0));
    expect(session.isStale("telemetry")).toBe(false);
    tick(3000);
    expect(session.isStale("telemetry")).toBe(true);
    expect(session.staleness("telemetry")).toBe(3000);
  });

  it("no data at all is stale", () => {
    const { session } = makeSession();
    expect(session.isStale("prediction")).toBe(true);
  });
});

describe("training", () => {
  it("cues drive the active card in order", () => {
    const { session } = makeSession();
    session.onMessage(msg("cue", 0, { label: "Neutral", event: "start", trial: 0, total: 10, duration_s: 8 }));
    expect(session.training.phase).toBe("running");
    expect(session.training.activeCue?.label).toBe("Neutral");
    session.onMessage(msg("cue", 1, { label: "Neutral", event: "stop", trial: 0, total: 10 }));
    expect(session.training.activeCue).toBeNull();
    session.onMessage(msg("cue", 2, { label: "Push", event: "start", trial: 1, total: 10, duration_s: 8 }));
    expect(session.training.activeCue?.label).toBe("Push");
  });

  it("completion stores the service report verbatim", () => {
    const { session } = makeSession();
    const report = {
      accuracy: 0.91,
      per_class_accuracy: { Neutral: 1.0 },
      confusion: [[1]],
      k_folds: 5,
    };
    session.onMessage(msg("training_control", 0, { action: "complete", report }));
    expect(session.training.phase).toBe("complete");
    expect(session.training.report).toEqual(report);
  });

  it("abort ack returns the UI to a non-running state", () => {
    const { session } = makeSession();
    session.onMessage(msg("cue", 0, { label: "Neutral", event: "start", trial: 0, total: 10 }));
    session.onMessage(msg("ack", 1, { training: "aborted" }));
    expect(session.training.phase).toBe("aborted");
    expect(session.training.activeCue).toBeNull();
  });
});

describe("event log", () => {
  it("errors and commands land in the log, bounded", () => {
    const { session } = makeSession();
    for (let i = 0; i < 300; i++) {
      session.onMessage(msg("error", i, { reason: `boom ${i}` }));
    }
    expect(session.log.length).toBeLessThanOrEqual(200);
    expect(session.log[session.log.length - 1]?.text).toContain("boom 299");
    expect(session.log[session.log.length - 1]?.level).toBe("error");
  });
});
