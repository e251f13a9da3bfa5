// Transport-agnostic client: hello handshake, reconnect with capped
// exponential backoff, and exactly one outgoing message per user action.

import { DriveCommand, WireMessage, decodeMsg, encodeMsg } from "./protocol.js";
import { ConsoleSession } from "./session.js";

/** Minimal duplex line transport (browser WebSocket or node socket). */
export interface Transport {
  send(data: string): void;
  close(): void;
  onLine(cb: (line: string) => void): void;
  onClose(cb: () => void): void;
  onError(cb: (err: Error) => void): void;
}

export type TransportFactory = () => Promise<Transport>;

export function backoffDelayMs(attempt: number, baseMs = 500, capMs = 8000): number {
  // 500, 1000, 2000, 4000, 8000, 8000, ...
  return Math.min(capMs, baseMs * Math.pow(2, attempt));
}

export class ConsoleClient {
  private transport: Transport | null = null;
  private seq = 0;
  private attempt = 0;
  private stopped = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly session: ConsoleSession,
    private readonly factory: TransportFactory,
    private readonly schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  ) {}

  async connect(): Promise<void> {
    this.stopped = false;
    await this.attemptConnect();
  }

  private async attemptConnect(): Promise<void> {
    if (this.stopped) return;
    this.session.onOpen();
    try {
      const transport = await this.factory();
      this.transport = transport;
      this.attempt = 0;
      transport.onLine((line) => {
        let msg: WireMessage;
        try {
          msg = decodeMsg(line);
        } catch {
          return; // a malformed line from the service is ignored, not fatal
        }
        this.session.onMessage(msg);
      });
      transport.onError(() => this.handleDrop());
      transport.onClose(() => this.handleDrop());
    } catch {
      this.handleDrop();
    }
  }

  private handleDrop(): void {
    if (this.transport) {
      const t = this.transport;
      this.transport = null;
      try {
        t.close();
      } catch {
        /* already closed */
      }
    }
    this.session.onClose();
    if (this.stopped || this.session.connection.kind === "version_mismatch") return;
    const delay = backoffDelayMs(this.attempt);
    this.session.onRetry(this.attempt, delay);
    this.attempt += 1;
    this.retryTimer = this.schedule(() => void this.attemptConnect(), delay);
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    if (this.transport) this.transport.close();
    this.transport = null;
    this.session.onClose();
  }

  /** Send one message; returns false (and sends nothing) when disconnected. */
  private sendMessage(type: WireMessage["type"], payload: Record<string, unknown>): boolean {
    if (!this.transport || !this.session.connected) return false;
    const msg: WireMessage = { type, seq: this.seq++, t: Date.now() / 1000, payload };
    this.transport.send(encodeMsg(msg));
    return true;
  }

  startTraining(): boolean {
    return this.sendMessage("training_control", { action: "start" });
  }

  abortTraining(): boolean {
    return this.sendMessage("training_control", { action: "abort" });
  }

  override(command: DriveCommand, source = "manual"): boolean {
    return this.sendMessage("session_control", { action: "override", command, source });
  }

  /** The always-available safety stop. */
  stop(): boolean {
    return this.override("Stop");
  }
}
