"""Prediction stream -> discrete drive commands via threshold, dwell, refractory.

A command is emitted only after N consecutive predictions agree on the same
non-Neutral label with confidence >= theta; each emission starts a refractory
window during which predictions are ignored. Sustained Neutral releases
latched motion with a Stop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .classifier import Prediction
from .signal_model import CommandLabel, ValidationError


class Command(Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    STOP = "Stop"


DEFAULT_LABEL_MAP: dict[CommandLabel, Command] = {
    CommandLabel.PUSH: Command.FORWARD,
    CommandLabel.PULL: Command.BACKWARD,
    CommandLabel.RIGHT: Command.TURN_RIGHT,
    CommandLabel.LEFT: Command.TURN_LEFT,
    CommandLabel.NEUTRAL: Command.STOP,
}

# The training-session command table is authoritative for this mapping; the
# surrounding prose swaps push/pull, so the map is overridable in config.


def map_label(label: CommandLabel,
              label_map: dict[CommandLabel, Command] | None = None) -> Command:
    mapping = label_map or DEFAULT_LABEL_MAP
    return mapping[CommandLabel(label)]


@dataclass(frozen=True)
class DecoderConfig:
    threshold: float = 0.6
    dwell: int = 3
    refractory_s: float = 1.0
    neutral_releases: bool = True
    label_map: dict[CommandLabel, Command] | None = None

    def __post_init__(self):
        if not (0 < self.threshold <= 1):
            raise ValidationError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.dwell < 1:
            raise ValidationError(f"dwell must be >= 1, got {self.dwell}")
        if self.refractory_s < 0:
            raise ValidationError(f"refractory_s must be >= 0, got {self.refractory_s}")


@dataclass(frozen=True)
class CommandEvent:
    command: Command
    confidence: float
    issued_at: float
    source: CommandLabel


@dataclass
class Decoder:
    """Deterministic gating automaton over a prediction stream."""

    config: DecoderConfig = field(default_factory=DecoderConfig)
    _run_label: CommandLabel | None = None
    _run_count: int = 0
    _last_emit_t: float | None = None
    _motion_latched: bool = False

    def push(self, prediction: Prediction) -> CommandEvent | None:
        cfg = self.config
        t = prediction.t_end
        if self._last_emit_t is not None and t < self._last_emit_t + cfg.refractory_s:
            return None  # refractory: prediction ignored entirely

        label = prediction.label
        conf = float(prediction.confidences[int(label)])
        qualifies = (label == CommandLabel.NEUTRAL) or conf >= cfg.threshold
        if not qualifies:
            self._run_label, self._run_count = None, 0
            return None
        if label == self._run_label:
            self._run_count += 1
        else:
            self._run_label, self._run_count = label, 1
        if self._run_count < cfg.dwell:
            return None

        self._run_label, self._run_count = None, 0
        if label == CommandLabel.NEUTRAL:
            if cfg.neutral_releases and self._motion_latched:
                self._motion_latched = False
                self._last_emit_t = t
                return CommandEvent(Command.STOP, conf, t, label)
            return None

        command = map_label(label, cfg.label_map)
        if command in (Command.FORWARD, Command.BACKWARD):
            self._motion_latched = True
        elif command == Command.STOP:
            self._motion_latched = False
        self._last_emit_t = t
        return CommandEvent(command, conf, t, label)


def decode(predictions, config: DecoderConfig | None = None) -> list[CommandEvent]:
    """Pure batch form: run the automaton over a prediction sequence."""
    dec = Decoder(config=config or DecoderConfig())
    events = []
    for p in predictions:
        ev = dec.push(p)
        if ev is not None:
            events.append(ev)
    return events
