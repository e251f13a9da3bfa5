import { describe, expect, it } from "vitest";

import { ConsoleClient, Transport, backoffDelayMs } from "../src/connection.js";
import { encodeClientFrame, FrameParser, acceptKeyFor } from "../src/nodeWs.js";
import { ConsoleSession } from "../src/session.js";

describe("backoff schedule", () => {
  it("doubles from 500 ms and caps at 8 s", () => {
    expect([0, 1, 2, 3, 4, 5, 9].map((n) => backoffDelayMs(n))).toEqual([
      500, 1000, 2000, 4000, 8000, 8000, 8000,
    ]);
  });
});

class FakeTransport implements Transport {
  sent: string[] = [];
  private lineCb: (line: string) => void = () => {};
  private closeCb: () => void = () => {};
  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {}
  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }
  onClose(cb: () => void): void {
    this.closeCb = cb;
  }
  onError(): void {}
  // test hooks
  pushLine(line: string): void {
    this.lineCb(line);
  }
  drop(): void {
    this.closeCb();
  }
}

const HELLO_LINE = '{"type":"ack","seq":0,"t":0,"payload":{"hello":true,"v":1}}';

describe("console client", () => {
  it("performs the hello handshake and sends exactly one message per action", async () => {
    const transport = new FakeTransport();
    const session = new ConsoleSession();
    const client = new ConsoleClient(session, async () => transport);
    await client.connect();
    transport.pushLine(HELLO_LINE);
    expect(session.connected).toBe(true);

    expect(client.stop()).toBe(true);
    expect(client.startTraining()).toBe(true);
    expect(transport.sent).toHaveLength(2);
    const stop = JSON.parse(transport.sent[0]!);
    expect(stop.type).toBe("session_control");
    expect(stop.payload).toEqual({ action: "override", command: "Stop", source: "manual" });
    const train = JSON.parse(transport.sent[1]!);
    expect(train.payload).toEqual({ action: "start" });
    expect(train.seq).toBe(stop.seq + 1);
    client.close();
  });

  it("refuses to send while disconnected", async () => {
    const transport = new FakeTransport();
    const session = new ConsoleSession();
    const client = new ConsoleClient(session, async () => transport);
    await client.connect();
    // connected transport but no hello yet: still not ready
    expect(client.stop()).toBe(false);
    expect(transport.sent).toHaveLength(0);
    client.close();
  });

  it("schedules reconnects with backoff after a drop", async () => {
    const scheduled: number[] = [];
    let transport = new FakeTransport();
    const session = new ConsoleSession();
    const client = new ConsoleClient(
      session,
      async () => {
        transport = new FakeTransport();
        return transport;
      },
      ((fn: () => void, ms: number) => {
        scheduled.push(ms);
        return setTimeout(() => {}, 0); // never actually re-run in the test
      }) as typeof setTimeout,
    );
    await client.connect();
    transport.pushLine(HELLO_LINE);
    transport.drop();
    expect(session.connection.kind).toBe("retrying");
    expect(scheduled).toEqual([500]);
    client.close();
  });

  it("ignores malformed lines from the service", async () => {
    const transport = new FakeTransport();
    const session = new ConsoleSession();
    const client = new ConsoleClient(session, async () => transport);
    await client.connect();
    transport.pushLine("garbage");
    transport.pushLine(HELLO_LINE);
    expect(session.connected).toBe(true);
    client.close();
  });
});

describe("websocket framing (node client)", () => {
  it("computes the documented accept key", () => {
    expect(acceptKeyFor("dGhlIHNhbXBsZSBub25jZQ==")).toBe("s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
  });

  it("masked client frames round-trip through the parser", () => {
    const parser = new FrameParser();
    for (const size of [0, 1, 125, 126, 65535, 70000]) {
      const payload = Buffer.alloc(size, 0x61);
      const frames = parser.feed(encodeClientFrame(0x1, payload, Buffer.from([1, 2, 3, 4])));
      expect(frames).toHaveLength(1);
      expect(frames[0]?.opcode).toBe(0x1);
      expect(frames[0]?.payload.equals(payload)).toBe(true);
    }
  });

  it("parses frames split across arbitrary chunk boundaries", () => {
    const payload = Buffer.from("hello world".repeat(30));
    const wire = encodeClientFrame(0x1, payload);
    const parser = new FrameParser();
    const frames: { opcode: number; payload: Buffer }[] = [];
    for (let i = 0; i < wire.length; i += 7) {
      frames.push(...parser.feed(wire.subarray(i, i + 7)));
    }
    expect(frames).toHaveLength(1);
    expect(frames[0]?.payload.equals(payload)).toBe(true);
  });
});
