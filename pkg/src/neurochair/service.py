"""Live streaming service: pipeline threads, NDJSON/WebSocket listener, recording.

One thread pumps frames through the pipeline, one steps the chair and emits
telemetry, one accepts console connections; each connection gets its own
sender thread with a drop-oldest buffer for high-rate message types so a
stalled console can never stall the control loop. Commands, cues, errors and
acks are never dropped.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from collections import deque

from . import chair as chair_sim
from .chair import ChairParams
from .classifier import ModelKind, TrainedModel, cross_validate, fit
from .config import ServiceConfig
from .decoder import Command
from .pipeline import ChairRunner, MessageLog, PipelineCore, source_frames
from .signal_model import ValidationError
from .wire import (
    ProtocolError,
    WS_OP_CLOSE,
    WS_OP_PING,
    WS_OP_PONG,
    WS_OP_TEXT,
    WireMessage,
    WsFrameReader,
    decode_msg,
    encode,
    hello_payload,
    ws_encode_control,
    ws_encode_text,
    ws_handshake_response,
)

log = logging.getLogger(__name__)

# message types a slow consumer may lose (drop-oldest)
DROPPABLE = {"frame", "features", "prediction", "telemetry"}


class SessionRecorder:
    """Append-only JSONL log of every message, in arrival order."""

    def __init__(self, path):
        self._fh = open(path, "a", buffering=1)
        self._lock = threading.Lock()

    def write(self, msg: WireMessage):
        with self._lock:
            self._fh.write(encode(msg).decode("utf-8"))

    def close(self):
        with self._lock:
            self._fh.close()


def replay_session(path) -> list[WireMessage]:
    """Parse a session log; a corrupt line aborts with its line number."""
    messages = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line == "" or not line.endswith("\n"):
                raise ValidationError(f"{path}: truncated log at line {lineno}")
            try:
                messages.append(decode_msg(line))
            except ProtocolError as e:
                raise ValidationError(f"{path}: corrupt log line {lineno}: {e}") from None
    return messages


def command_sequence(messages: list[WireMessage]) -> list[tuple[int, str, str]]:
    return [(m.seq, m.payload["command"], m.payload["source"])
            for m in messages if m.type == "command"]


class Connection:
    """One console connection (raw NDJSON or WebSocket) with its own sender."""

    def __init__(self, service: "Service", sock: socket.socket, addr):
        self.service = service
        self.sock = sock
        self.addr = addr
        self.ws = False
        self._critical: deque[bytes] = deque()
        self._droppable: deque[bytes] = deque(maxlen=256)
        self._wake = threading.Event()
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._writer = threading.Thread(target=self._write_loop, daemon=True)

    def start(self):
        self._reader.start()

    def send(self, msg: WireMessage):
        data = encode(msg)
        if msg.type in DROPPABLE:
            self._droppable.append(data)
        else:
            self._critical.append(data)
        self._wake.set()

    def close(self):
        if not self._closed.is_set():
            self._closed.set()
            self._wake.set()
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()

    # ------------------------------------------------------------- internals

    def _write_loop(self):
        while not self._closed.is_set():
            self._wake.wait(timeout=0.5)
            self._wake.clear()
            try:
                while self._critical or self._droppable:
                    queue = self._critical if self._critical else self._droppable
                    data = queue.popleft()
                    if self.ws:
                        data = ws_encode_text(data)
                    self.sock.sendall(data)
            except OSError:
                self.close()
                return

    def _read_loop(self):
        try:
            first = self.sock.recv(4096)
            if not first:
                self.close()
                return
            if first.startswith(b"GET "):
                self._ws_setup(first)
            else:
                self._send_hello()
                self._writer.start()
                self._ndjson_loop(first)
        except (OSError, ProtocolError) as e:
            log.debug("connection %s closed: %s", self.addr, e)
        finally:
            self.close()
            self.service._drop_connection(self)

    def _send_hello(self):
        self.send(self.service.hub_message("ack", hello_payload()))

    def _ndjson_loop(self, initial: bytes):
        buf = bytearray(initial)
        while not self._closed.is_set():
            while b"\n" in buf:
                line, _, rest = bytes(buf).partition(b"\n")
                buf = bytearray(rest)
                if line.strip():
                    self._handle_line(line)
            data = self.sock.recv(4096)
            if not data:
                return
            buf.extend(data)

    def _ws_setup(self, first: bytes):
        data = bytearray(first)
        while b"\r\n\r\n" not in data:
            chunk = self.sock.recv(4096)
            if not chunk:
                return
            data.extend(chunk)
        head, _, rest = bytes(data).partition(b"\r\n\r\n")
        headers = {}
        for raw in head.split(b"\r\n")[1:]:
            k, _, v = raw.decode("latin-1").partition(":")
            headers[k.strip().lower()] = v.strip()
        self.sock.sendall(ws_handshake_response(headers))
        self.ws = True
        self._send_hello()
        self._writer.start()
        reader = WsFrameReader()
        pending = reader.feed(rest)
        while not self._closed.is_set():
            for opcode, payload in pending:
                if opcode == WS_OP_TEXT:
                    for line in payload.split(b"\n"):
                        if line.strip():
                            self._handle_line(line)
                elif opcode == WS_OP_PING:
                    self.sock.sendall(ws_encode_control(WS_OP_PONG, payload))
                elif opcode == WS_OP_CLOSE:
                    return
            chunk = self.sock.recv(4096)
            if not chunk:
                return
            pending = reader.feed(chunk)

    def _handle_line(self, line: bytes):
        try:
            msg = decode_msg(line)
        except ProtocolError as e:
            seq = _maybe_seq(line)
            payload = {"reason": str(e)}
            if seq is not None:
                payload["offending_seq"] = seq
            self.send(self.service.hub_message("error", payload))
            return
        self.service.handle_incoming(msg, self)


def _maybe_seq(line: bytes):
    try:
        doc = json.loads(line)
        seq = doc.get("seq") if isinstance(doc, dict) else None
        return seq if isinstance(seq, int) else None
    except (json.JSONDecodeError, UnicodeDecodeError):
        return None


class Service:
    """Orchestrates source -> dsp -> classifier -> decoder -> chair and consoles."""

    def __init__(self, config: ServiceConfig, model: TrainedModel | None = None,
                 record_path=None):
        self.config = config
        self.model = model
        self._model_lock = threading.Lock()
        self.recorder = SessionRecorder(record_path) if record_path else None
        self.log = MessageLog()
        self._log_lock = threading.Lock()
        self._connections: list[Connection] = []
        self._conn_lock = threading.Lock()
        self._stop = threading.Event()
        self.stream_done = threading.Event()
        self._listener: socket.socket | None = None
        self.port: int | None = None

        self.chair = ChairRunner(world=config.world, params=config.chair,
                                 dt_s=config.chair_step_dt_s,
                                 telemetry_period_s=1.0 / config.telemetry_hz,
                                 publish=self.publish)
        self._chair_lock = threading.Lock()
        self.core = PipelineCore(config, model, self.publish,
                                 on_command=self._on_command)
        self.core.check_model()
        self._threads: list[threading.Thread] = []

    # ------------------------------------------------------------ publishing

    def publish(self, mtype: str, t: float, payload: dict) -> WireMessage:
        with self._log_lock:
            msg = self.log.publish(mtype, t, payload)
        if self.recorder:
            self.recorder.write(msg)
        with self._conn_lock:
            conns = list(self._connections)
        for c in conns:
            c.send(msg)
        return msg

    def hub_message(self, mtype: str, payload: dict) -> WireMessage:
        with self._log_lock:
            return self.log.publish(mtype, time.monotonic(), payload)

    # ------------------------------------------------------------- lifecycle

    def start(self):
        cfg = self.config
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((cfg.host, cfg.port))
        except OSError as e:
            raise ValidationError(f"cannot listen on {cfg.host}:{cfg.port}: {e}") from None
        self._listener.listen(8)
        self.port = self._listener.getsockname()[1]
        for target in (self._accept_loop, self._pipeline_loop, self._chair_loop):
            th = threading.Thread(target=target, daemon=True)
            th.start()
            self._threads.append(th)
        log.info("service listening on %s:%d", cfg.host, self.port)
        return self

    def stop(self):
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._conn_lock:
            conns = list(self._connections)
        deadline = time.monotonic() + 2.0
        for c in conns:
            while (c._critical or c._droppable) and time.monotonic() < deadline:
                time.sleep(0.01)  # drain queued messages before closing
            c.close()
        if self.recorder:
            self.recorder.close()

    def run_until_done(self, timeout: float | None = None) -> bool:
        return self.stream_done.wait(timeout)

    # ---------------------------------------------------------------- loops

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = Connection(self, sock, addr)
            with self._conn_lock:
                self._connections.append(conn)
            conn.start()

    def _drop_connection(self, conn: Connection):
        with self._conn_lock:
            if conn in self._connections:
                self._connections.remove(conn)

    def _pipeline_loop(self):
        cfg = self.config
        try:
            rec = source_frames(cfg)
        except Exception as e:
            self.publish("error", 0.0, {"reason": f"source failed: {e}"})
            self.stream_done.set()
            return
        fs = cfg.montage.sampling_rate_hz
        t_wall0 = time.monotonic()
        try:
            for frame in rec.frames:
                if self._stop.is_set():
                    break
                if cfg.realtime:
                    lag = frame.t - (time.monotonic() - t_wall0)
                    if lag > 0.002:
                        time.sleep(lag)
                try:
                    self.core.process_frame(frame)
                except Exception as e:
                    # fail safe: report and halt motion rather than crash
                    self.publish("error", frame.t, {"reason": f"pipeline stage failed: {e}"})
                    self._apply_override(Command.STOP, frame.t, "failsafe")
                    break
                if self.core.training is not None and self.core.training.done:
                    self._finish_training(frame.t)
                if not cfg.realtime:
                    with self._chair_lock:
                        self.chair.advance_to(frame.t)
        finally:
            self.stream_done.set()

    def _chair_loop(self):
        if not self.config.realtime:
            return  # chair advances in stream time from the pipeline loop
        period = self.config.chair_step_dt_s
        while not self._stop.is_set():
            time.sleep(period)
            with self._chair_lock:
                self.chair.advance_to(self.chair.t + period)

    # ------------------------------------------------------------- commands

    def _on_command(self, ev):
        with self._chair_lock:
            self.chair.enqueue(ev)

    def _apply_override(self, command: Command, t: float, source: str):
        with self._chair_lock:
            self.chair.override(command, t)
        self.publish("command", t,
                     {"command": command.value, "confidence": 1.0, "source": source})

    # ------------------------------------------------------------- incoming

    def handle_incoming(self, msg: WireMessage, conn: Connection):
        if self.recorder:
            self.recorder.write(msg)
        if msg.type == "training_control":
            self._handle_training_control(msg, conn)
        elif msg.type == "session_control":
            self._handle_session_control(msg, conn)
        elif msg.type == "ack":
            pass
        else:
            conn.send(self.hub_message("error", {
                "reason": f"unexpected client message type {msg.type!r}",
                "offending_seq": msg.seq}))

    def _handle_training_control(self, msg: WireMessage, conn: Connection):
        action = msg.payload.get("action")
        if action == "start":
            t0 = _next_hop_boundary(self.core)
            self.core.start_training(t0)
            conn.send(self.hub_message("ack", {"training": "started", "t0": t0}))
        elif action == "abort":
            self.core.abort_training()
            conn.send(self.hub_message("ack", {"training": "aborted"}))
        else:
            conn.send(self.hub_message("error",
                                       {"reason": f"unknown training action {action!r}"}))

    def _handle_session_control(self, msg: WireMessage, conn: Connection):
        action = msg.payload.get("action")
        if action == "override":
            try:
                command = Command(msg.payload.get("command"))
            except ValueError:
                conn.send(self.hub_message("error", {
                    "reason": f"unknown command {msg.payload.get('command')!r}"}))
                return
            self._apply_override(command, msg.t, msg.payload.get("source", "manual"))
        elif action == "stop_service":
            self._stop.set()
            self.stream_done.set()
        else:
            conn.send(self.hub_message("error",
                                       {"reason": f"unknown session action {action!r}"}))

    # ------------------------------------------------------------- training

    def _finish_training(self, t: float):
        collector = self.core.training
        self.core.training = None

        def work():
            try:
                session = collector.to_session()
                kind = self.config.classifier.kind
                cfg = self.config.classifier
                kwargs = (dict(ridge=cfg.ridge) if kind == ModelKind.LINEAR_DISCRIMINANT
                          else dict(n_trees=cfg.n_trees, max_depth=cfg.max_depth))
                model = fit(session, kind, seed=cfg.seed,
                            channel_names=self.config.montage.channel_names,
                            band_names=[b.name.value for b in self.config.bands],
                            sampling_rate_hz=self.config.montage.sampling_rate_hz,
                            **kwargs)
                report = cross_validate(session, kind,
                                        min(cfg.cv_folds, self.config.protocol_trials),
                                        seed=cfg.seed, **kwargs)
                with self._model_lock:
                    self.model = model
                    self.core.model = model
                self.publish("training_control", t, {
                    "action": "complete",
                    "report": report.to_dict(),
                })
            except Exception as e:
                self.publish("error", t, {"reason": f"training failed: {e}"})

        threading.Thread(target=work, daemon=True).start()


def _next_hop_boundary(core: PipelineCore) -> float:
    # start training on the next whole second of stream time so the first
    # trial gets a full, cleanly aligned window
    import math
    return math.ceil(core.last_t + 0.5)


def serve(config: ServiceConfig, model: TrainedModel | None = None,
          record_path=None) -> Service:
    """Start the service; returns the running instance."""
    return Service(config, model, record_path).start()
