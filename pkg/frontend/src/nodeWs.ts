// Node-side WebSocket client transport for the service's HTTP-upgrade
// listener. Used by the scripted end-to-end test; the browser build uses the
// native WebSocket instead. Client frames are masked per the protocol.

import { createHash, randomBytes } from "node:crypto";
import { Socket, connect } from "node:net";

import { Transport } from "./connection.js";

const WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
const OP_TEXT = 0x1;
const OP_CLOSE = 0x8;
const OP_PING = 0x9;
const OP_PONG = 0xa;

export function acceptKeyFor(clientKey: string): string {
  return createHash("sha1").update(clientKey + WS_GUID).digest("base64");
}

export function encodeClientFrame(opcode: number, payload: Buffer, mask?: Buffer): Buffer {
  const maskKey = mask ?? randomBytes(4);
  const n = payload.length;
  let header: Buffer;
  if (n < 126) {
    header = Buffer.from([0x80 | opcode, 0x80 | n]);
  } else if (n < 65536) {
    header = Buffer.alloc(4);
    header[0] = 0x80 | opcode;
    header[1] = 0x80 | 126;
    header.writeUInt16BE(n, 2);
  } else {
    header = Buffer.alloc(10);
    header[0] = 0x80 | opcode;
    header[1] = 0x80 | 127;
    header.writeBigUInt64BE(BigInt(n), 2);
  }
  const body = Buffer.alloc(n);
  for (let i = 0; i < n; i++) body[i] = (payload[i] as number) ^ (maskKey[i % 4] as number);
  return Buffer.concat([header, maskKey, body]);
}

/** Incremental parser for (possibly unmasked) server frames. */
export class FrameParser {
  private buf = Buffer.alloc(0);

  feed(data: Buffer): { opcode: number; payload: Buffer }[] {
    this.buf = Buffer.concat([this.buf, data]);
    const frames: { opcode: number; payload: Buffer }[] = [];
    for (;;) {
      const frame = this.tryParse();
      if (!frame) return frames;
      frames.push(frame);
    }
  }

  private tryParse(): { opcode: number; payload: Buffer } | null {
    const buf = this.buf;
    if (buf.length < 2) return null;
    const opcode = (buf[0] as number) & 0x0f;
    const masked = ((buf[1] as number) & 0x80) !== 0;
    let length = (buf[1] as number) & 0x7f;
    let pos = 2;
    if (length === 126) {
      if (buf.length < 4) return null;
      length = buf.readUInt16BE(2);
      pos = 4;
    } else if (length === 127) {
      if (buf.length < 10) return null;
      length = Number(buf.readBigUInt64BE(2));
      pos = 10;
    }
    let mask: Buffer | null = null;
    if (masked) {
      if (buf.length < pos + 4) return null;
      mask = buf.subarray(pos, pos + 4);
      pos += 4;
    }
    if (buf.length < pos + length) return null;
    let payload = Buffer.from(buf.subarray(pos, pos + length));
    this.buf = buf.subarray(pos + length);
    if (mask) {
      for (let i = 0; i < payload.length; i++) {
        payload[i] = (payload[i] as number) ^ (mask[i % 4] as number);
      }
    }
    return { opcode, payload };
  }
}

export function connectNodeWs(host: string, port: number, timeoutMs = 5000): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const sock: Socket = connect({ host, port });
    const key = randomBytes(16).toString("base64");
    const expectedAccept = acceptKeyFor(key);
    let lineCb: (line: string) => void = () => {};
    let closeCb: () => void = () => {};
    let errorCb: (err: Error) => void = () => {};
    let upgraded = false;
    let headBuf = Buffer.alloc(0);
    let textBuf = "";
    const parser = new FrameParser();

    const timer = setTimeout(() => {
      sock.destroy();
      reject(new Error("websocket handshake timed out"));
    }, timeoutMs);

    const transport: Transport = {
      send(data: string) {
        sock.write(encodeClientFrame(OP_TEXT, Buffer.from(data, "utf-8")));
      },
      close() {
        try {
          sock.write(encodeClientFrame(OP_CLOSE, Buffer.alloc(0)));
        } catch {
          /* already gone */
        }
        sock.destroy();
      },
      onLine(cb) {
        lineCb = cb;
      },
      onClose(cb) {
        closeCb = cb;
      },
      onError(cb) {
        errorCb = cb;
      },
    };

    sock.on("connect", () => {
      sock.write(
        `GET / HTTP/1.1\r\n` +
          `Host: ${host}:${port}\r\n` +
          `Upgrade: websocket\r\n` +
          `Connection: Upgrade\r\n` +
          `Sec-WebSocket-Key: ${key}\r\n` +
          `Sec-WebSocket-Version: 13\r\n\r\n`,
      );
    });

    sock.on("data", (data: Buffer) => {
      if (!upgraded) {
        headBuf = Buffer.concat([headBuf, data]);
        const idx = headBuf.indexOf("\r\n\r\n");
        if (idx < 0) return;
        const head = headBuf.subarray(0, idx).toString("latin1");
        if (!head.includes("101") || !head.includes(expectedAccept)) {
          clearTimeout(timer);
          sock.destroy();
          reject(new Error("websocket upgrade rejected"));
          return;
        }
        upgraded = true;
        clearTimeout(timer);
        resolve(transport);
        const rest = headBuf.subarray(idx + 4);
        if (rest.length > 0) handleFrames(rest);
        return;
      }
      handleFrames(data);
    });

    function handleFrames(data: Buffer): void {
      for (const { opcode, payload } of parser.feed(data)) {
        if (opcode === OP_TEXT) {
          textBuf += payload.toString("utf-8");
          let nl: number;
          while ((nl = textBuf.indexOf("\n")) >= 0) {
            const line = textBuf.slice(0, nl);
            textBuf = textBuf.slice(nl + 1);
            if (line.trim().length > 0) lineCb(line);
          }
        } else if (opcode === OP_PING) {
          sock.write(encodeClientFrame(OP_PONG, payload));
        } else if (opcode === OP_CLOSE) {
          sock.destroy();
        }
      }
    }

    sock.on("error", (err: Error) => {
      clearTimeout(timer);
      if (!upgraded) reject(err);
      else errorCb(err);
    });
    sock.on("close", () => {
      clearTimeout(timer);
      if (upgraded) closeCb();
    });
  });
}
