"""Shared domain types: montage, channels, bands, frames, epochs, command labels."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np


class ValidationError(ValueError):
    """Raised when a domain object or operation input fails its invariants."""


class Hemisphere(Enum):
    LEFT = "Left"
    RIGHT = "Right"
    MIDLINE = "Midline"


# 10-20 label: region letters, then either a digit group or the midline 'z'.
_LABEL_RE = re.compile(r"^[A-Za-z]+?(\d+|[zZ])$")


def classify_hemisphere(name: str) -> Hemisphere:
    """Derive the hemisphere from a 10-20 channel label.

    Even trailing digit -> right hemisphere, odd -> left, 'z' suffix -> midline.
    """
    m = _LABEL_RE.match(name or "")
    if m is None:
        raise ValidationError(f"malformed 10-20 channel label: {name!r}")
    suffix = m.group(1)
    if suffix.lower() == "z":
        return Hemisphere.MIDLINE
    return Hemisphere.RIGHT if int(suffix) % 2 == 0 else Hemisphere.LEFT


@dataclass(frozen=True)
class ChannelDescriptor:
    name: str
    hemisphere: Hemisphere = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        derived = classify_hemisphere(self.name)
        if self.hemisphere is None:
            object.__setattr__(self, "hemisphere", derived)
        elif self.hemisphere != derived:
            raise ValidationError(
                f"channel {self.name!r}: stored hemisphere {self.hemisphere} "
                f"contradicts label convention ({derived})"
            )


@dataclass(frozen=True)
class Montage:
    channels: tuple[ChannelDescriptor, ...]
    sampling_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ValidationError("montage must have at least one channel")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate channel names in montage: {names}")
        if not self.sampling_rate_hz > 0:
            raise ValidationError(f"sampling_rate_hz must be > 0, got {self.sampling_rate_hz}")

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def nyquist_hz(self) -> float:
        return self.sampling_rate_hz / 2.0

    def channel_index(self, name: str) -> int:
        for i, c in enumerate(self.channels):
            if c.name == name:
                return i
        raise ValidationError(f"channel {name!r} not in montage")


# 14-channel default drawn from the named 10-20 positions; 128 Hz is a common
# consumer-headset rate (the source never states one) and keeps tests fast.
DEFAULT_CHANNEL_NAMES = [
    "Fp1", "Fp2", "F7", "F3", "F4", "F8",
    "T3", "C3", "C4", "T4", "P3", "P4", "O1", "O2",
]
DEFAULT_SAMPLING_RATE_HZ = 128.0


def default_montage(sampling_rate_hz: float = DEFAULT_SAMPLING_RATE_HZ) -> Montage:
    """14-channel montage over standard 10-20 positions."""
    return Montage(
        channels=tuple(ChannelDescriptor(n) for n in DEFAULT_CHANNEL_NAMES),
        sampling_rate_hz=sampling_rate_hz,
    )


class Band(Enum):
    DELTA = "Delta"
    THETA = "Theta"
    ALPHA = "Alpha"
    BETA = "Beta"
    GAMMA = "Gamma"


@dataclass(frozen=True)
class BandDefinition:
    name: Band
    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not (0 <= self.low_hz < self.high_hz):
            raise ValidationError(
                f"band {self.name.value}: need 0 <= low < high, got [{self.low_hz}, {self.high_hz})"
            )

    def contains(self, freq_hz: float) -> bool:
        return self.low_hz <= freq_hz < self.high_hz


# Canonical brain-rhythm ranges; contiguous, non-overlapping partition of [0, 100) Hz.
DEFAULT_BANDS: tuple[BandDefinition, ...] = (
    BandDefinition(Band.DELTA, 0.0, 4.0),
    BandDefinition(Band.THETA, 4.0, 8.0),
    BandDefinition(Band.ALPHA, 8.0, 13.0),
    BandDefinition(Band.BETA, 13.0, 30.0),
    BandDefinition(Band.GAMMA, 30.0, 100.0),
)


def band_by_name(name: str, bands: tuple[BandDefinition, ...] = DEFAULT_BANDS) -> BandDefinition:
    for b in bands:
        if b.name.value.lower() == name.lower():
            return b
    raise ValidationError(f"unknown band name: {name!r}")


class CommandLabel(IntEnum):
    """Mental-command training classes; Neutral is always class index 0."""

    NEUTRAL = 0
    PUSH = 1
    PULL = 2
    LEFT = 3
    RIGHT = 4

    @classmethod
    def from_name(cls, name: str) -> "CommandLabel":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValidationError(f"unknown command label: {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class EEGFrame:
    """One multi-channel sample: values in microvolts, one per montage channel."""

    seq: int
    t: float
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))


def validate_frame(frame: EEGFrame, montage: Montage) -> None:
    if len(frame.values) != montage.n_channels:
        raise ValidationError(
            f"frame seq={frame.seq} has {len(frame.values)} values, "
            f"montage has {montage.n_channels} channels"
        )


@dataclass(frozen=True)
class Epoch:
    """Contiguous window of frames, stored as a (channels x samples) array."""

    montage: Montage
    data: np.ndarray  # shape (n_channels, n_samples)
    start_seq: int
    t_start: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != self.montage.n_channels:
            raise ValidationError(
                f"epoch data shape {data.shape} does not match montage "
                f"({self.montage.n_channels} channels)"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.montage.sampling_rate_hz

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration_s

    @classmethod
    def from_frames(cls, frames: list[EEGFrame], montage: Montage) -> "Epoch":
        if not frames:
            raise ValidationError("epoch needs at least one frame")
        for f in frames:
            validate_frame(f, montage)
        seqs = [f.seq for f in frames]
        if seqs != list(range(seqs[0], seqs[0] + len(seqs))):
            raise ValidationError(f"seq gap inside epoch starting at seq {seqs[0]}")
        data = np.array([f.values for f in frames], dtype=float).T
        return cls(montage=montage, data=data, start_seq=seqs[0], t_start=frames[0].t)
