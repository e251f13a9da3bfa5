import numpy as np
import pytest

from neurochair.dsp import (
    Epocher,
    FilterKind,
    FilterSpec,
    apply_filter_chain,
    band_power,
    design_filter,
    epoch_stream,
    extract_features,
    max_pole_magnitude,
    welch_psd,
)
from neurochair.signal_model import (
    DEFAULT_BANDS,
    EEGFrame,
    Epoch,
    ValidationError,
    band_by_name,
    default_montage,
)

FS = 128.0


def make_frames(n, montage, fill=0.0, skip=None):
    frames = []
    seq = 0
    for i in range(n):
        if skip is not None and i == skip:
            seq += 1  # drop one frame: seq gap
            continue
        frames.append(EEGFrame(seq=seq, t=seq / FS, values=tuple([fill] * montage.n_channels)))
        seq += 1
    return frames


def sine_epoch(montage, freq, amp, seconds=1.0, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    sig = amp * np.sin(2 * np.pi * freq * t)
    return Epoch(montage=montage, data=np.tile(sig, (montage.n_channels, 1)),
                 start_seq=0, t_start=0.0)


def periodogram_band_power(x, fs, low, high):
    """Independent oracle: direct full-length periodogram summation."""
    n = len(x)
    spec = np.abs(np.fft.rfft(x)) ** 2 / (fs * n)
    spec[1:] *= 2.0
    if n % 2 == 0:
        spec[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, 1 / fs)
    df = fs / n
    mask = (freqs >= low) & (freqs < min(high, fs / 2))
    return spec[mask].sum() * df


# ------------------------------------------------------------------ filters

def test_bandpass_stable():
    sos = design_filter(FilterSpec(FilterKind.BANDPASS, low_hz=0.5, high_hz=45.0), FS)
    assert max_pole_magnitude(sos) < 1.0


def test_bandpass_above_nyquist_rejected():
    with pytest.raises(ValidationError):
        design_filter(FilterSpec(FilterKind.BANDPASS, low_hz=0.5, high_hz=70.0), FS)


def test_filter_order_bounds():
    with pytest.raises(ValidationError):
        FilterSpec(FilterKind.BANDPASS, low_hz=1, high_hz=30, order=1)
    with pytest.raises(ValidationError):
        FilterSpec(FilterKind.BANDPASS, low_hz=1, high_hz=30, order=9)


def test_notch_attenuates_mains():
    """60 Hz notch: output RMS < 5% of input RMS on the last 80% of 4 s."""
    fs = 256.0
    sos = design_filter(FilterSpec(FilterKind.NOTCH, center_hz=60.0), fs)
    t = np.arange(int(4 * fs)) / fs
    x = np.sin(2 * np.pi * 60.0 * t)
    y = apply_filter_chain(x[None, :], [sos], zero_phase=False)[0]
    tail = slice(int(0.2 * len(t)), None)
    assert np.sqrt(np.mean(y[tail] ** 2)) < 0.05 * np.sqrt(np.mean(x[tail] ** 2))


def test_notch_above_nyquist_rejected():
    with pytest.raises(ValidationError):
        design_filter(FilterSpec(FilterKind.NOTCH, center_hz=60.0), 100.0)


# ----------------------------------------------------------------- epoching

def test_epoch_count_non_overlapping(montage):
    epochs = list(epoch_stream(make_frames(512, montage), montage, 1.0, 1.0))
    assert len(epochs) == 4


def test_epoch_count_quarter_hop(montage):
    epochs = list(epoch_stream(make_frames(512, montage), montage, 1.0, 0.25))
    assert len(epochs) == 13  # floor((4-1)/0.25)+1


def test_epocher_rejects_bad_hop(montage):
    with pytest.raises(ValidationError):
        Epocher(montage, 1.0, 0.0)
    with pytest.raises(ValidationError):
        Epocher(montage, 1.0, 2.0)


def test_missing_frame_drops_exactly_overlapping_windows(montage):
    """Oracle: enumerate the grid windows that contain the missing seq."""
    n, skip = 512, 200
    epoch_len, hop = 128, 32
    ep = Epocher(montage, 1.0, 0.25)
    emitted = []
    for f in make_frames(n, montage, skip=skip):
        emitted.extend(ep.push(f))

    # windows on the pre-gap grid that overlap seq `skip`
    overlapping = [s for s in range(0, n - epoch_len + 1, hop)
                   if s <= skip < s + epoch_len]
    assert ep.dropped == len(overlapping)
    starts = [e.start_seq for e in emitted]
    # pre-gap grid windows that don't touch the gap are all emitted
    for s in range(0, n - epoch_len + 1, hop):
        if s + epoch_len <= skip:
            assert s in starts
    assert skip not in {s for e in emitted for s in range(e.start_seq,
                                                          e.start_seq + epoch_len)}


# -------------------------------------------------------------------- welch

def test_welch_zero_signal(montage):
    ep = sine_epoch(montage, 10, 0.0)
    spec = welch_psd(ep)
    assert np.all(spec.power == 0.0)


def test_welch_white_noise_parseval(montage):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(128)
    ep = Epoch(montage=montage, data=np.tile(x, (14, 1)), start_seq=0, t_start=0.0)
    spec = welch_psd(ep)
    integral = spec.power[0].sum() * spec.df_hz
    assert integral == pytest.approx(np.mean(x ** 2), rel=0.15)


def test_welch_peak_location(montage):
    ep = sine_epoch(montage, 10, 1.0)
    spec = welch_psd(ep)
    peak = spec.freqs_hz[np.argmax(spec.power[0])]
    assert abs(peak - 10.0) <= spec.df_hz


def test_welch_epoch_shorter_than_segment(montage):
    ep = sine_epoch(montage, 10, 1.0, seconds=0.25)
    with pytest.raises(ValidationError):
        welch_psd(ep, segment_len=64)


# --------------------------------------------------------------- band power

def test_alpha_power_of_10hz_sine_vs_oracle(montage):
    fs = FS
    t = np.arange(int(4 * fs)) / fs
    x = 2.0 * np.sin(2 * np.pi * 10.0 * t)
    ep = Epoch(montage=montage, data=np.tile(x, (14, 1)), start_seq=0, t_start=0.0)
    spec = welch_psd(ep)
    alpha = band_by_name("Alpha")
    delta = band_by_name("Delta")
    p_alpha = band_power(spec, alpha, montage.nyquist_hz)[0]
    p_delta = band_power(spec, delta, montage.nyquist_hz)[0]
    assert p_alpha == pytest.approx(2.0, rel=0.10)  # A^2/2
    assert p_delta < 0.05
    # independent oracle agrees
    oracle = periodogram_band_power(x, fs, alpha.low_hz, alpha.high_hz)
    assert p_alpha == pytest.approx(oracle, rel=0.10)


def test_band_power_zero_signal(montage):
    spec = welch_psd(sine_epoch(montage, 10, 0.0))
    for b in DEFAULT_BANDS:
        assert np.all(band_power(spec, b, montage.nyquist_hz) == 0.0)


def test_band_power_additive_over_partition(montage):
    rng = np.random.default_rng(2)
    ep = Epoch(montage=montage, data=rng.standard_normal((14, 256)),
               start_seq=0, t_start=0.0)
    spec = welch_psd(ep)
    total = sum(band_power(spec, b, montage.nyquist_hz) for b in DEFAULT_BANDS)
    mask = spec.freqs_hz < montage.nyquist_hz
    direct = spec.power[:, mask].sum(axis=1) * spec.df_hz
    assert np.allclose(total, direct)


def test_band_fully_above_nyquist_rejected(montage):
    from neurochair.signal_model import Band, BandDefinition
    spec = welch_psd(sine_epoch(montage, 10, 1.0))
    with pytest.raises(ValidationError):
        band_power(spec, BandDefinition(Band.GAMMA, 70.0, 100.0), montage.nyquist_hz)


def test_dsp_purity(montage):
    ep = sine_epoch(montage, 10, 1.0)
    s1 = welch_psd(ep)
    s2 = welch_psd(ep)
    assert np.array_equal(s1.power, s2.power)


# ----------------------------------------------------------------- features

def test_zero_epoch_features_hit_epsilon_floor(montage):
    ep = sine_epoch(montage, 10, 0.0)
    fv = extract_features(ep, filter_chain=None)
    assert np.allclose(fv.values, -12.0)


def test_scaling_epoch_shifts_every_feature_by_two(montage):
    ep1 = sine_epoch(montage, 10, 1.0)
    ep2 = Epoch(montage=montage, data=ep1.data * 10.0, start_seq=0, t_start=0.0)
    f1 = extract_features(ep1, filter_chain=None)
    f2 = extract_features(ep2, filter_chain=None)
    strong = f1.values > -6  # epsilon floor negligible here
    assert np.allclose((f2.values - f1.values)[strong], 2.0, atol=1e-9)


def test_feature_dimensions(montage):
    fv = extract_features(sine_epoch(montage, 10, 1.0))
    assert fv.values.shape == (14, 5)
    assert np.all(np.isfinite(fv.values))
