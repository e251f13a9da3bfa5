import { describe, expect, it } from "vitest";

import {
  MESSAGE_TYPES,
  ProtocolError,
  WireMessage,
  decodeMsg,
  encodeMsg,
  helloVersion,
  isHello,
} from "../src/protocol.js";

function roundTrip(msg: WireMessage): WireMessage {
  const line = encodeMsg(msg);
  expect(line.endsWith("\n")).toBe(true);
  expect(line.indexOf("\n")).toBe(line.length - 1);
  return decodeMsg(line.slice(0, -1));
}

describe("ndjson codec", () => {
  it("round-trips every message type", () => {
    for (const [i, type] of MESSAGE_TYPES.entries()) {
      const msg: WireMessage = {
        type,
        seq: i * 7,
        t: i * 0.25,
        payload: { idx: i, nested: { ok: true, list: [1, "two", null] } },
      };
      expect(roundTrip(msg)).toEqual(msg);
    }
  });

  it("round-trips awkward numbers and strings", () => {
    const msg: WireMessage = {
      type: "telemetry",
      seq: 2 ** 40,
      t: -0.0001220703125,
      payload: { s: "line\nbreak \"quotes\" ünïcode", big: 1e300, tiny: 5e-324 },
    };
    expect(roundTrip(msg)).toEqual(msg);
  });

  it("rejects malformed lines", () => {
    const bad = [
      "",
      "not json",
      "[1,2]",
      '"str"',
      '{"type":"frame","seq":0}',
      '{"type":"bogus","seq":0,"t":0,"payload":{}}',
      '{"type":"frame","seq":-1,"t":0,"payload":{}}',
      '{"type":"frame","seq":0.5,"t":0,"payload":{}}',
      '{"type":"frame","seq":0,"t":"x","payload":{}}',
      '{"type":"frame","seq":0,"t":0,"payload":[]}',
    ];
    for (const line of bad) {
      expect(() => decodeMsg(line), line).toThrow(ProtocolError);
    }
  });

  it("recognizes the hello handshake", () => {
    const hello = decodeMsg('{"type":"ack","seq":0,"t":0,"payload":{"hello":true,"v":1}}');
    expect(isHello(hello)).toBe(true);
    expect(helloVersion(hello)).toBe(1);
    const plain = decodeMsg('{"type":"ack","seq":1,"t":0,"payload":{}}');
    expect(isHello(plain)).toBe(false);
  });
});
