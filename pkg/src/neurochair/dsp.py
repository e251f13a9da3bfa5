"""Filtering, epoching, Welch spectral estimation and band-power features."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal as sps

from .signal_model import (
    BandDefinition,
    DEFAULT_BANDS,
    EEGFrame,
    Epoch,
    Montage,
    ValidationError,
    validate_frame,
)

log = logging.getLogger(__name__)

_clip_warned: set = set()

DEFAULT_EPOCH_LEN_S = 1.0
DEFAULT_HOP_S = 0.25
DEFAULT_SEGMENT_LEN = 64
DEFAULT_OVERLAP = 0.5
LOG_POWER_EPSILON = 1e-12


class FilterKind(Enum):
    BANDPASS = "Bandpass"
    NOTCH = "Notch"


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    low_hz: float = 0.0
    high_hz: float = 0.0
    center_hz: float = 0.0
    q: float = 30.0
    order: int = 4

    def __post_init__(self):
        if not (2 <= self.order <= 8):
            raise ValidationError(f"filter order must be in [2, 8], got {self.order}")
        if self.kind == FilterKind.BANDPASS:
            if not (0 < self.low_hz < self.high_hz):
                raise ValidationError(
                    f"bandpass needs 0 < low < high, got [{self.low_hz}, {self.high_hz}]"
                )
        else:
            if not self.center_hz > 0:
                raise ValidationError(f"notch center must be > 0, got {self.center_hz}")
            if not self.q > 0:
                raise ValidationError(f"notch q must be > 0, got {self.q}")


def design_filter(spec: FilterSpec, fs_hz: float) -> np.ndarray:
    """Design a stable recursive filter, returned in second-order sections.

    Applied zero-phase (forward-backward) by apply_filter, so the effective
    order doubles and phase distortion cancels.
    """
    nyq = fs_hz / 2.0
    if spec.kind == FilterKind.BANDPASS:
        if spec.high_hz >= nyq:
            raise ValidationError(
                f"bandpass high edge {spec.high_hz} Hz >= Nyquist {nyq} Hz"
            )
        sos = sps.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass",
                         fs=fs_hz, output="sos")
    else:
        if spec.center_hz >= nyq:
            raise ValidationError(
                f"notch center {spec.center_hz} Hz >= Nyquist {nyq} Hz"
            )
        b, a = sps.iirnotch(spec.center_hz, spec.q, fs=fs_hz)
        sos = sps.tf2sos(b, a)
    assert max_pole_magnitude(sos) < 1.0, "designed filter is unstable"
    return sos


def max_pole_magnitude(sos: np.ndarray) -> float:
    mags = [0.0]
    for section in sos:
        poles = np.roots(section[3:])
        if poles.size:
            mags.append(float(np.max(np.abs(poles))))
    return max(mags)


def apply_filter_chain(data: np.ndarray, chain: list[np.ndarray],
                       zero_phase: bool = True) -> np.ndarray:
    """Apply a list of sos filters along the sample axis.

    zero_phase uses forward-backward filtering (no phase distortion, edge
    transients at both ends); otherwise a single causal pass.
    """
    out = np.asarray(data, dtype=float)
    for sos in chain:
        out = sps.sosfiltfilt(sos, out, axis=-1) if zero_phase else \
            sps.sosfilt(sos, out, axis=-1)
    return out


def default_filter_chain(fs_hz: float, notch_hz: float | None = None) -> list[np.ndarray]:
    """Bandpass 0.5-45 Hz plus an optional mains notch."""
    high = min(45.0, fs_hz / 2.0 - 1.0)
    chain = [design_filter(FilterSpec(FilterKind.BANDPASS, low_hz=0.5, high_hz=high), fs_hz)]
    if notch_hz is not None:
        chain.append(design_filter(FilterSpec(FilterKind.NOTCH, center_hz=notch_hz), fs_hz))
    return chain


class Epocher:
    """Sliding-window epocher over a frame stream.

    Windows containing a seq gap are dropped and counted, then the window
    position advances past the gap.
    """

    def __init__(self, montage: Montage, epoch_len_s: float = DEFAULT_EPOCH_LEN_S,
                 hop_s: float = DEFAULT_HOP_S):
        if not (0 < hop_s <= epoch_len_s):
            raise ValidationError(f"need 0 < hop ({hop_s}) <= epoch length ({epoch_len_s})")
        self.montage = montage
        self.epoch_len = max(1, round(epoch_len_s * montage.sampling_rate_hz))
        self.hop = max(1, round(hop_s * montage.sampling_rate_hz))
        self.dropped = 0
        self._buf: list[EEGFrame] = []

    def push(self, frame: EEGFrame) -> list[Epoch]:
        validate_frame(frame, self.montage)
        if self._buf and frame.seq != self._buf[-1].seq + 1:
            # every window overlapping the gap is unusable
            n = len(self._buf)
            self.dropped += max(0, (n - 1) // self.hop + 1) if n >= 1 else 0
            self._buf = []
        self._buf.append(frame)
        out = []
        while len(self._buf) >= self.epoch_len:
            out.append(Epoch.from_frames(self._buf[: self.epoch_len], self.montage))
            self._buf = self._buf[self.hop:]
        return out


def epoch_stream(frames, montage: Montage, epoch_len_s: float = DEFAULT_EPOCH_LEN_S,
                 hop_s: float = DEFAULT_HOP_S):
    """Yield sliding-window epochs from an iterable of frames."""
    ep = Epocher(montage, epoch_len_s, hop_s)
    for frame in frames:
        yield from ep.push(frame)


@dataclass(frozen=True)
class PowerSpectrum:
    freqs_hz: np.ndarray        # ascending, [0, Nyquist]
    power: np.ndarray           # (n_channels, n_bins), uV^2/Hz
    df_hz: float

    def __post_init__(self):
        object.__setattr__(self, "freqs_hz", np.asarray(self.freqs_hz, dtype=float))
        object.__setattr__(self, "power", np.asarray(self.power, dtype=float))
        if np.any(self.power < 0):
            raise ValidationError("power spectrum has negative entries")


def welch_psd(epoch: Epoch, segment_len: int = DEFAULT_SEGMENT_LEN,
              overlap_fraction: float = DEFAULT_OVERLAP) -> PowerSpectrum:
    """One-sided Welch PSD with Hann windowing.

    Density-normalized so the rectangle-rule integral over frequency equals
    the mean squared signal value (Parseval, up to window bias).
    """
    x = epoch.data
    fs = epoch.montage.sampling_rate_hz
    n = x.shape[1]
    if segment_len > n:
        raise ValidationError(f"epoch of {n} samples shorter than segment_len {segment_len}")
    hop = max(1, int(round(segment_len * (1.0 - overlap_fraction))))
    win = np.hanning(segment_len)
    win_power = np.sum(win ** 2)

    starts = list(range(0, n - segment_len + 1, hop))
    acc = np.zeros((x.shape[0], segment_len // 2 + 1))
    for s in starts:
        seg = x[:, s:s + segment_len] * win
        spec = np.fft.rfft(seg, axis=1)
        acc += np.abs(spec) ** 2
    psd = acc / (len(starts) * fs * win_power)
    # one-sided: double everything except DC (and Nyquist for even lengths)
    psd[:, 1:] *= 2.0
    if segment_len % 2 == 0:
        psd[:, -1] /= 2.0
    freqs = np.fft.rfftfreq(segment_len, d=1.0 / fs)
    return PowerSpectrum(freqs_hz=freqs, power=psd, df_hz=fs / segment_len)


def band_power(spectrum: PowerSpectrum, band: BandDefinition,
               nyquist_hz: float | None = None) -> np.ndarray:
    """Integrate the PSD over [low, high) per channel (rectangle rule on bins)."""
    nyq = nyquist_hz if nyquist_hz is not None else float(spectrum.freqs_hz[-1])
    if band.low_hz >= nyq:
        raise ValidationError(
            f"band {band.name.value} [{band.low_hz}, {band.high_hz}) lies fully "
            f"above Nyquist {nyq} Hz"
        )
    high = band.high_hz
    if high > nyq:
        key = (band.name, high, nyq)
        if key not in _clip_warned:
            _clip_warned.add(key)
            log.warning("band %s clipped from %.1f Hz to Nyquist %.1f Hz",
                        band.name.value, high, nyq)
        high = nyq
    mask = (spectrum.freqs_hz >= band.low_hz) & (spectrum.freqs_hz < high)
    return spectrum.power[:, mask].sum(axis=1) * spectrum.df_hz


@dataclass(frozen=True)
class FeatureVector:
    """log10 band power per (channel, band) over one epoch."""

    values: np.ndarray          # (n_channels, n_bands)
    t_start: float
    t_end: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature vector contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


def extract_features(epoch: Epoch, bands: tuple[BandDefinition, ...] = DEFAULT_BANDS,
                     filter_chain: list[np.ndarray] | None = None,
                     segment_len: int = DEFAULT_SEGMENT_LEN,
                     overlap_fraction: float = DEFAULT_OVERLAP) -> FeatureVector:
    """Filter, estimate the PSD, and take log10 band power per channel and band."""
    data = epoch.data
    if filter_chain:
        data = apply_filter_chain(data, filter_chain)
        epoch = Epoch(montage=epoch.montage, data=data,
                      start_seq=epoch.start_seq, t_start=epoch.t_start)
    spectrum = welch_psd(epoch, segment_len, overlap_fraction)
    nyq = epoch.montage.nyquist_hz
    powers = np.column_stack([band_power(spectrum, b, nyq) for b in bands])
    return FeatureVector(values=np.log10(powers + LOG_POWER_EPSILON),
                         t_start=epoch.t_start, t_end=epoch.t_end)
