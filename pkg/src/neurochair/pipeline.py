"""Pipeline wiring shared by the live service, the bench harness and the CLI.

Stages: frame source -> filtering/epoching -> band-power features ->
classifier -> decoder -> chair simulator, with every hop published as a
WireMessage. Stream time (frame timestamps) drives all decisions, so the
command sequence is a pure function of (config, seed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import chair as chair_sim
from .chair import ChairParams, ChairState, World
from .classifier import (
    Prediction,
    SessionState,
    TrainedModel,
    TrainingSession,
    predict,
)
from .config import ServiceConfig
from .decoder import Command, CommandEvent, Decoder
from .dsp import (
    Epocher,
    FeatureVector,
    FilterKind,
    FilterSpec,
    design_filter,
    extract_features,
)
from .signal_model import CommandLabel, EEGFrame, ValidationError
from .synth import generate_recording, load_csv
from .wire import WireMessage


def features_payload(fv: FeatureVector) -> dict:
    return {"values": fv.values.tolist(), "t_start": fv.t_start, "t_end": fv.t_end}


def prediction_payload(p: Prediction) -> dict:
    return {"label": p.label.label,
            "confidences": [float(c) for c in p.confidences],
            "t_start": p.t_start, "t_end": p.t_end}


def command_payload(ev: CommandEvent) -> dict:
    return {"command": ev.command.value, "confidence": ev.confidence,
            "source": ev.source.label}


class MessageLog:
    """Collects published messages with per-type sequence numbers."""

    def __init__(self):
        self.messages: list[WireMessage] = []
        self._seq: dict[str, int] = {}

    def publish(self, mtype: str, t: float, payload: dict) -> WireMessage:
        seq = self._seq.get(mtype, 0)
        self._seq[mtype] = seq + 1
        msg = WireMessage(type=mtype, seq=seq, t=t, payload=payload)
        self.messages.append(msg)
        return msg

    def by_type(self, mtype: str) -> list[WireMessage]:
        return [m for m in self.messages if m.type == mtype]


class TrainingCollector:
    """Streams features into per-trial buckets while cueing trial boundaries."""

    def __init__(self, protocol, t0: float, publish):
        self.protocol = TrainingSession(protocol=protocol).protocol  # validated
        self.publish = publish
        self.trials: list[tuple[CommandLabel, float, float]] = []
        cursor = t0
        for label, count, dur in self.protocol:
            for _ in range(count):
                self.trials.append((label, cursor, cursor + dur))
                cursor += dur
        self.end_t = cursor
        self.buckets: list[list[FeatureVector]] = [[] for _ in self.trials]
        self._next_cue = 0  # next trial whose start cue is pending
        self.done = False
        self.aborted = False

    def on_time(self, t: float):
        """Emit due cue messages as stream time advances."""
        while self._next_cue < len(self.trials) and t >= self.trials[self._next_cue][1]:
            label, t0, t1 = self.trials[self._next_cue]
            if self._next_cue > 0:
                prev = self.trials[self._next_cue - 1]
                self.publish("cue", t0, {"label": prev[0].label, "event": "stop",
                                         "trial": self._next_cue - 1,
                                         "total": len(self.trials)})
            self.publish("cue", t0, {"label": label.label, "event": "start",
                                     "trial": self._next_cue, "total": len(self.trials),
                                     "duration_s": t1 - t0})
            self._next_cue += 1
        if not self.done and t >= self.end_t:
            last = self.trials[-1]
            self.publish("cue", self.end_t, {"label": last[0].label, "event": "stop",
                                             "trial": len(self.trials) - 1,
                                             "total": len(self.trials)})
            self.done = True

    def add(self, fv: FeatureVector):
        for i, (label, t0, t1) in enumerate(self.trials):
            if fv.t_start >= t0 - 1e-9 and fv.t_end <= t1 + 1e-9:
                self.buckets[i].append(fv)
                return

    def to_session(self) -> TrainingSession:
        session = TrainingSession(protocol=self.protocol)
        session.collected = {label: [] for label, _, _ in self.protocol}
        for (label, _, _), bucket in zip(self.trials, self.buckets):
            session.collected[label].append(bucket)
        session.state = SessionState.COMPLETE
        return session


@dataclass
class ChairRunner:
    """Steps the chair on a fixed dt grid of stream time."""

    world: World
    params: ChairParams
    dt_s: float
    telemetry_period_s: float
    publish: object
    state: ChairState = field(default_factory=ChairState)
    t: float = 0.0
    _next_telemetry_t: float = 0.0
    _pending: list[CommandEvent] = field(default_factory=list)
    collisions: int = 0

    def enqueue(self, ev: CommandEvent):
        self._pending.append(ev)

    def override(self, command: Command, t: float):
        self.state = chair_sim.apply_command(self.state, command, self.params)

    def advance_to(self, t_target: float):
        while self.t + self.dt_s <= t_target + 1e-12:
            while self._pending and self._pending[0].issued_at <= self.t + 1e-12:
                ev = self._pending.pop(0)
                self.state = chair_sim.apply_command(self.state, ev.command, self.params)
            was_collided = self.state.collided
            self.state = chair_sim.step(self.state, self.world, self.dt_s, self.params)
            if self.state.collided and not was_collided:
                self.collisions += 1
            self.t += self.dt_s
            if self.t >= self._next_telemetry_t - 1e-12:
                self.publish("telemetry", self.t, chair_sim.telemetry(self.state))
                self._next_telemetry_t += self.telemetry_period_s


class PipelineCore:
    """Per-frame processing: epoching, features, prediction, command decoding."""

    def __init__(self, config: ServiceConfig, model: TrainedModel | None, publish,
                 on_command=None, stream_frames: bool = False):
        self.config = config
        self.model = model
        self.publish = publish
        self.on_command = on_command
        self.stream_frames = stream_frames or config.debug_frames
        fs = config.montage.sampling_rate_hz
        chain = [design_filter(FilterSpec(FilterKind.BANDPASS,
                                          low_hz=config.bandpass[0],
                                          high_hz=config.bandpass[1]), fs)]
        if config.notch_hz is not None:
            chain.append(design_filter(FilterSpec(FilterKind.NOTCH,
                                                  center_hz=config.notch_hz), fs))
        self.filter_chain = chain
        self.epocher = Epocher(config.montage, config.epoch_len_s, config.hop_s)
        self.decoder = Decoder(config=config.decoder)
        self.training: TrainingCollector | None = None
        self.processing_times: list[float] = []
        self.last_t: float = 0.0

    def check_model(self):
        if self.model is not None:
            expected = self.config.montage.n_channels * len(self.config.bands)
            if self.model.n_features != expected:
                raise ValidationError(
                    f"model expects {self.model.n_features} features but config "
                    f"yields {expected} (channels x bands)")

    def start_training(self, t0: float, protocol=None):
        cfg = self.config
        if protocol is None:
            from .classifier import default_protocol
            protocol = default_protocol(cfg.protocol_trials, cfg.protocol_trial_duration_s)
        self.training = TrainingCollector(protocol, t0, self.publish)
        return self.training

    def abort_training(self):
        if self.training is not None:
            self.training.aborted = True
            self.training = None

    def process_frame(self, frame: EEGFrame) -> list[CommandEvent]:
        self.last_t = frame.t
        if self.stream_frames:
            self.publish("frame", frame.t, {"seq": frame.seq, "values": list(frame.values)})
        if self.training is not None:
            self.training.on_time(frame.t)
        events: list[CommandEvent] = []
        for epoch in self.epocher.push(frame):
            t_proc0 = time.perf_counter()
            fv = extract_features(epoch, self.config.bands, self.filter_chain,
                                  self.config.segment_len, self.config.overlap)
            self.publish("features", fv.t_end, features_payload(fv))
            if self.training is not None:
                self.training.add(fv)
            elif self.model is not None:
                pred = predict(self.model, fv)
                self.publish("prediction", fv.t_end, prediction_payload(pred))
                ev = self.decoder.push(pred)
                if ev is not None:
                    self.publish("command", ev.issued_at, command_payload(ev))
                    events.append(ev)
                    if self.on_command is not None:
                        self.on_command(ev)
            self.processing_times.append(time.perf_counter() - t_proc0)
        return events


def source_frames(config: ServiceConfig):
    """Materialize the configured frame source (synth scenario or CSV replay)."""
    if config.scenario is not None:
        rec = generate_recording(config.scenario, config.montage, config.bands)
    else:
        rec = load_csv(config.replay_path, config.montage)
    return rec


@dataclass
class OfflineRun:
    log: MessageLog
    chair: ChairRunner
    core: PipelineCore
    wall_time_s: float
    stream_duration_s: float

    @property
    def commands(self) -> list[WireMessage]:
        return self.log.by_type("command")


def run_offline(config: ServiceConfig, model: TrainedModel | None,
                duration_s: float | None = None) -> OfflineRun:
    """Run the full pipeline over the configured source without pacing."""
    log = MessageLog()
    chair = ChairRunner(world=config.world, params=config.chair,
                        dt_s=config.chair_step_dt_s,
                        telemetry_period_s=1.0 / config.telemetry_hz,
                        publish=log.publish)
    core = PipelineCore(config, model, log.publish, on_command=chair.enqueue)
    core.check_model()
    rec = source_frames(config)
    t_wall0 = time.perf_counter()
    last_t = 0.0
    for frame in rec.frames:
        if duration_s is not None and frame.t >= duration_s:
            break
        core.process_frame(frame)
        chair.advance_to(frame.t)
        last_t = frame.t
    wall = time.perf_counter() - t_wall0
    return OfflineRun(log=log, chair=chair, core=core, wall_time_s=wall,
                      stream_duration_s=last_t)
