"""Deterministic synthetic EEG source and session recording/replay.

Signal model: per-class multiplicative gains on band-limited sinusoid banks
(seeded random phases) over a pink-noise floor, plus an optional mains line.
Band powers are therefore directly controllable and measurable by the same
DSP stage that consumes them.
"""

from __future__ import annotations

import csv
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .signal_model import (
    Band,
    BandDefinition,
    CommandLabel,
    DEFAULT_BANDS,
    EEGFrame,
    Montage,
    ValidationError,
    band_by_name,
)

CSV_PRECISION = 6  # significant digits; round-trip stable

# oscillators per band-limited component
_OSC_PER_BAND = 4


@dataclass(frozen=True)
class SignatureComponent:
    channel: str
    band: Band
    gain: float

    def __post_init__(self):
        if not self.gain > 0:
            raise ValidationError(f"signature gain must be > 0, got {self.gain}")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    intent_script: tuple[tuple[CommandLabel, float], ...]
    signatures: dict[CommandLabel, tuple[SignatureComponent, ...]] = field(default_factory=dict)
    noise_amplitude_uv: float = 2.0
    rhythm_amplitude_uv: float = 1.0
    mains_hz: float | None = None
    mains_amplitude_uv: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "intent_script",
                           tuple((CommandLabel(l), float(d)) for l, d in self.intent_script))
        object.__setattr__(self, "signatures",
                           {CommandLabel(k): tuple(v) for k, v in self.signatures.items()})
        if not self.intent_script:
            raise ValidationError("intent script must not be empty")
        for label, dur in self.intent_script:
            if not dur > 0:
                raise ValidationError(f"intent duration must be > 0, got {dur} for {label.label}")
        if self.signatures.get(CommandLabel.NEUTRAL):
            raise ValidationError("Neutral signature must be empty (baseline only)")
        if self.mains_hz is not None and self.mains_hz not in (50.0, 60.0):
            raise ValidationError(f"mains frequency must be 50 or 60 Hz, got {self.mains_hz}")

    @property
    def duration_s(self) -> float:
        return sum(d for _, d in self.intent_script)


@dataclass(frozen=True)
class IntentInterval:
    label: CommandLabel
    t_start: float
    t_end: float


@dataclass(frozen=True)
class SessionRecording:
    montage: Montage
    frames: tuple[EEGFrame, ...]
    intervals: tuple[IntentInterval, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "intervals", tuple(self.intervals))
        prev_end = None
        for iv in self.intervals:
            if prev_end is not None and abs(iv.t_start - prev_end) > 1e-9:
                raise ValidationError("intent intervals must tile the recording without overlap")
            prev_end = iv.t_end

    @property
    def duration_s(self) -> float:
        return len(self.frames) / self.montage.sampling_rate_hz


def pink_noise(rng: np.random.Generator, n_samples: int, n_rows: int = 16) -> np.ndarray:
    """Voss-McCartney pink noise: sum of rows resampled at octave-spaced rates."""
    total = np.zeros(n_samples)
    for k in range(n_rows):
        period = 2 ** k
        n_vals = n_samples // period + 2
        vals = rng.standard_normal(n_vals)
        total += np.repeat(vals, period)[:n_samples]
    total /= np.sqrt(n_rows)
    return total


def _oscillator_bank(rng: np.random.Generator, band: BandDefinition, nyquist: float,
                     t: np.ndarray) -> np.ndarray:
    """Unit-RMS sum of sinusoids spread across the band (clipped to Nyquist)."""
    high = min(band.high_hz, nyquist)
    low = band.low_hz
    if high <= low:
        return np.zeros_like(t)
    freqs = low + (high - low) * (np.arange(1, _OSC_PER_BAND + 1) / (_OSC_PER_BAND + 1))
    phases = rng.uniform(0, 2 * np.pi, size=_OSC_PER_BAND)
    out = np.zeros_like(t)
    for f, p in zip(freqs, phases):
        out += np.sin(2 * np.pi * f * t + p)
    # each sinusoid has power 1/2, sum of K independent-phase tones -> K/2
    out /= np.sqrt(_OSC_PER_BAND / 2.0)
    return out


def generate(spec: ScenarioSpec, montage: Montage,
             bands: tuple[BandDefinition, ...] = DEFAULT_BANDS
             ) -> tuple[list[EEGFrame], list[IntentInterval]]:
    """Deterministically synthesize a session for (spec, montage)."""
    for label, comps in spec.signatures.items():
        for c in comps:
            montage.channel_index(c.channel)  # raises for unknown channel
            band_by_name(c.band.value, bands)

    fs = montage.sampling_rate_hz
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs
    rng = np.random.default_rng(spec.seed)

    # per-sample intent label and interval list
    intervals: list[IntentInterval] = []
    labels = np.zeros(n, dtype=int)
    cursor = 0.0
    for label, dur in spec.intent_script:
        i0 = int(round(cursor * fs))
        cursor += dur
        i1 = min(n, int(round(cursor * fs)))
        labels[i0:i1] = int(label)
        intervals.append(IntentInterval(label, i0 / fs, i1 / fs))

    data = np.zeros((montage.n_channels, n))

    # pink-noise floor, independent per channel
    if spec.noise_amplitude_uv > 0:
        for ch in range(montage.n_channels):
            data[ch] += spec.noise_amplitude_uv * pink_noise(rng, n)

    if spec.mains_hz is not None and spec.mains_amplitude_uv > 0:
        mains = spec.mains_amplitude_uv * np.sin(2 * np.pi * spec.mains_hz * t)
        data += mains[None, :]

    # oscillatory components exist wherever a signature references them; their
    # amplitude is rhythm_amplitude_uv at rest, scaled by the gain during intent
    band_map = {b.name: b for b in bands}
    components: dict[tuple[int, Band], np.ndarray] = {}
    gains: dict[tuple[int, Band], np.ndarray] = {}
    for label in sorted(spec.signatures):
        for comp in spec.signatures[label]:
            key = (montage.channel_index(comp.channel), comp.band)
            if key not in components:
                components[key] = _oscillator_bank(rng, band_map[comp.band], fs / 2.0, t)
                gains[key] = np.ones(n)
            gains[key][labels == int(label)] = comp.gain
    for (ch, _band), osc in components.items():
        data[ch] += spec.rhythm_amplitude_uv * gains[(ch, _band)] * osc

    if not np.all(np.isfinite(data)):
        raise ValidationError("generated signal contains non-finite samples")

    frames = [EEGFrame(seq=i, t=t[i], values=tuple(data[:, i])) for i in range(n)]
    return frames, intervals


def generate_recording(spec: ScenarioSpec, montage: Montage,
                       bands: tuple[BandDefinition, ...] = DEFAULT_BANDS) -> SessionRecording:
    frames, intervals = generate(spec, montage, bands)
    return SessionRecording(montage=montage, frames=tuple(frames), intervals=tuple(intervals))


def replay(recording: SessionRecording, speed: float = 1.0, pace: bool = True):
    """Yield the recorded frames in order; speed scales inter-frame pacing only."""
    if not speed > 0:
        raise ValidationError(f"replay speed must be > 0, got {speed}")
    if not recording.frames:
        raise ValidationError("cannot replay an empty recording")
    prev_t = None
    for frame in recording.frames:
        if pace and prev_t is not None:
            _time.sleep(max(0.0, (frame.t - prev_t) / speed))
        prev_t = frame.t
        yield frame


def _fmt(x: float) -> str:
    return f"{x:.{CSV_PRECISION}g}"


def write_csv(recording: SessionRecording, path) -> None:
    """Header `t,<ch1>,...,<chN>[,label]`; values at 6 significant digits."""
    have_labels = bool(recording.intervals)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t"] + recording.montage.channel_names
        if have_labels:
            header.append("label")
        w.writerow(header)
        ivals = list(recording.intervals)
        k = 0
        for frame in recording.frames:
            row = [_fmt(frame.t)] + [_fmt(v) for v in frame.values]
            if have_labels:
                while k + 1 < len(ivals) and frame.t >= ivals[k].t_end - 1e-12:
                    k += 1
                row.append(ivals[k].label.label)
            w.writerow(row)


def load_csv(path, montage: Montage | None = None) -> SessionRecording:
    """Parse a session CSV; seq is assigned 0..n-1."""
    from .signal_model import ChannelDescriptor, DEFAULT_SAMPLING_RATE_HZ

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if not header or header[0] != "t":
            raise ValidationError(f"{path}: first header column must be 't', got {header[:1]}")
        has_label = header[-1] == "label"
        ch_names = header[1:-1] if has_label else header[1:]
        if not ch_names:
            raise ValidationError(f"{path}: no channel columns in header")

        if montage is not None:
            if ch_names != montage.channel_names:
                raise ValidationError(
                    f"{path}: header channels {ch_names} do not match montage "
                    f"{montage.channel_names}"
                )
        times: list[float] = []
        rows: list[tuple[float, ...]] = []
        row_labels: list[str | None] = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {i}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                times.append(float(row[0]))
                rows.append(tuple(float(v) for v in row[1:len(ch_names) + 1]))
            except ValueError as e:
                raise ValidationError(f"{path}: row {i}: non-numeric cell ({e})") from None
            row_labels.append(row[-1] if has_label else None)

    if not rows:
        raise ValidationError(f"{path}: no data rows")
    if montage is None:
        if len(times) > 1:
            fs = (len(times) - 1) / (times[-1] - times[0])
        else:
            fs = DEFAULT_SAMPLING_RATE_HZ
        montage = Montage(channels=tuple(ChannelDescriptor(n) for n in ch_names),
                          sampling_rate_hz=fs)

    frames = tuple(EEGFrame(seq=i, t=times[i], values=rows[i]) for i in range(len(rows)))
    intervals: list[IntentInterval] = []
    if has_label:
        fs = montage.sampling_rate_hz
        start = 0
        for i in range(1, len(row_labels) + 1):
            if i == len(row_labels) or row_labels[i] != row_labels[start]:
                intervals.append(IntentInterval(
                    CommandLabel.from_name(row_labels[start]),
                    start / fs, i / fs))
                start = i
    return SessionRecording(montage=montage, frames=frames, intervals=tuple(intervals))
