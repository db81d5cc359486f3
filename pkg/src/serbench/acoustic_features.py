"""Frame-level acoustic descriptors and utterance-level feature vectors.

The pipeline is: cut the signal into frames, estimate a pitch track by
normalized autocorrelation, fill a matrix of low-level descriptors (LLDs),
then collapse each descriptor contour to statistics ("functionals"). Two
presets are exposed: a curated 88-dimension vector and a brute-force preset
that applies the full functional bank to every contour and its first
difference.

Pitch analysis uses its own, longer window (40 ms against 25 ms for the
spectral channels) so that the autocorrelation covers at least two periods
of the lowest searchable pitch; both run on the same 10 ms hop grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct
from sklearn.base import BaseEstimator, TransformerMixin

from .audio_io import AudioClip
from .errors import NotFinite, NotMono, TooShort, UnknownPreset

CHANNEL_NAMES = (
    "f0_hz",
    "voicing_prob",
    "rms_energy",
    "log_energy",
    "jitter_local",
    "shimmer_local_db",
    "hnr_db",
    "alpha_ratio_db",
    "hammarberg_db",
    "spectral_slope_0_500",
    "spectral_slope_500_1500",
    "spectral_centroid_hz",
    "spectral_flux",
    "zcr",
) + tuple(f"mfcc_{i}" for i in range(1, 14))

# Channels whose functionals are computed over voiced frames only.
VOICED_ONLY_CHANNELS = frozenset({"f0_hz", "jitter_local", "shimmer_local_db", "hnr_db"})

DURATIONAL_NAMES = ("voiced_fraction", "mean_voiced_segment_length_s", "utterance_duration_s")

_EPS = 1e-10
# Small per-octave bias towards shorter lags when picking the autocorrelation
# peak; keeps a perfectly periodic signal from flipping to a subharmonic.
_OCTAVE_BIAS = 0.02


@dataclass
class FeatureConfig:
    win_ms: float = 25.0
    hop_ms: float = 10.0
    pitch_win_ms: float = 40.0
    f_min: float = 60.0
    f_max: float = 500.0
    voicing_threshold: float = 0.45
    n_mels: int = 26
    n_mfcc: int = 13
    mel_fmin: float = 20.0


@dataclass
class FrameSeries:
    """Raw (unwindowed) frames cut on a regular hop grid."""

    frames: np.ndarray  # (n_frames, win) float64
    win_ms: float
    hop_ms: float
    sample_rate: int


@dataclass
class LldMatrix:
    channel_names: tuple
    values: np.ndarray  # (n_channels, n_frames)
    voiced_mask: np.ndarray  # (n_frames,) bool


@dataclass
class FunctionalBank:
    names: tuple

    def __post_init__(self):
        self.names = tuple(self.names)
        if not self.names:
            raise ValueError("functional bank must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("functional names must be unique")
        unknown = [n for n in self.names if n not in _FUNCTIONALS and n not in _MASK_FUNCTIONALS]
        if unknown:
            raise ValueError(f"unknown functionals: {unknown}")


@dataclass
class FeatureDescriptor:
    preset: str
    names: tuple
    dimension: int = field(init=False)

    def __post_init__(self):
        self.names = tuple(self.names)
        self.dimension = len(self.names)


@dataclass
class FeatureVector:
    utterance_id: str
    values: np.ndarray
    descriptor: FeatureDescriptor


def frame_signal(clip: AudioClip, win_ms: float = 25.0, hop_ms: float = 10.0) -> FrameSeries:
    """Cut a mono clip into floor((N - win) / hop) + 1 raw frames."""
    if clip.channels != 1:
        raise NotMono("framing requires a mono clip")
    rate = clip.sample_rate
    win = int(round(win_ms * rate / 1000.0))
    hop = int(round(hop_ms * rate / 1000.0))
    x = clip.samples
    if x.size < win:
        raise TooShort(f"clip of {x.size} samples is shorter than one {win}-sample window")
    n_frames = (x.size - win) // hop + 1
    idx = np.arange(win)[None, :] + (np.arange(n_frames) * hop)[:, None]
    return FrameSeries(frames=x[idx], win_ms=win_ms, hop_ms=hop_ms, sample_rate=rate)


def _normalized_autocorr(frames: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    """Amplitude-normalized autocorrelation for lags [lag_min, lag_max].

    ncc[t, j] = sum(x[n] x[n+tau]) / sqrt(sum_head(x^2) * sum_tail(x^2)) with
    tau = lag_min + j, computed on mean-removed frames. Values are clipped to
    [-1, 1]; frames with (near-)zero energy yield all-zero rows.
    """
    x = frames - frames.mean(axis=1, keepdims=True)
    n = x.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft, axis=1)
    raw = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, : lag_max + 1]

    sq = np.concatenate([np.zeros((x.shape[0], 1)), np.cumsum(x * x, axis=1)], axis=1)
    total = sq[:, -1:]
    lags = np.arange(lag_min, lag_max + 1)
    head = sq[:, n - lags]          # energy of x[0 : n-tau]
    tail = total - sq[:, lags]      # energy of x[tau : n]
    denom = np.sqrt(head * tail)
    floor = np.maximum(total, _EPS) * 1e-9
    ncc = np.where(denom > floor, raw[:, lag_min : lag_max + 1] / np.maximum(denom, _EPS), 0.0)
    return np.clip(ncc, -1.0, 1.0)


def _parabolic_peak(ym1: float, y0: float, yp1: float) -> tuple[float, float]:
    """Vertex offset in [-0.5, 0.5] and value of the parabola through 3 points."""
    denom = ym1 - 2.0 * y0 + yp1
    if denom >= 0.0:
        return 0.0, y0
    delta = 0.5 * (ym1 - yp1) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    return delta, y0 - 0.25 * (ym1 - yp1) * delta


def _f0_autocorr(
    frames: np.ndarray,
    rate: int,
    f_min: float,
    f_max: float,
    voicing_threshold: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (f0, voiced flag, raw peak correlation)."""
    n = frames.shape[1]
    lag_min = max(2, int(np.ceil(rate / f_max)))
    lag_max = min(int(np.floor(rate / f_min)), n // 2)
    if lag_max <= lag_min:
        z = np.zeros(frames.shape[0])
        return z, np.zeros(frames.shape[0], dtype=bool), z

    ncc = _normalized_autocorr(frames, lag_min, lag_max)
    lags = np.arange(lag_min, lag_max + 1)
    score = ncc - _OCTAVE_BIAS * np.log2(lags / lag_min)[None, :]
    best = np.argmax(score, axis=1)

    n_frames = frames.shape[0]
    f0 = np.zeros(n_frames)
    peak = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for t in range(n_frames):
        j = int(best[t])
        r = float(ncc[t, j])
        peak[t] = max(r, 0.0)
        if r < voicing_threshold:
            continue
        lag = float(lags[j])
        if 0 < j < ncc.shape[1] - 1:
            delta, _ = _parabolic_peak(ncc[t, j - 1], r, ncc[t, j + 1])
            lag += delta
        voiced[t] = True
        f0[t] = rate / lag
    return f0, voiced, peak


def detect_f0_track(
    frames: FrameSeries,
    f_min: float = 60.0,
    f_max: float = 500.0,
    voicing_threshold: float = 0.45,
) -> tuple[np.ndarray, np.ndarray]:
    """Pitch per frame via normalized autocorrelation with parabolic refinement.

    A frame is voiced iff its peak correlation reaches the threshold; unvoiced
    frames get f0 = 0. Degenerate (silent) frames are unvoiced, never errors.
    Frames should span at least two periods of f_min; shorter frames have the
    search range clamped to half the frame length instead of erroring.
    """
    f0, voiced, _ = _f0_autocorr(
        frames.frames, frames.sample_rate, f_min, f_max, voicing_threshold
    )
    return f0, voiced


def _voiced_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end) index runs of True values."""
    runs = []
    start = None
    for i, v in enumerate(mask):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, mask.size))
    return runs


def _refine_extremum(y: np.ndarray, m: int) -> tuple[float, float]:
    """Sub-sample position and height of a local maximum of y near index m."""
    if 0 < m < y.size - 1:
        delta, amp = _parabolic_peak(y[m - 1], y[m], y[m + 1])
        return m + delta, amp
    return float(m), float(y[m])


def _track_period_marks(
    x: np.ndarray, f0: np.ndarray, run: tuple[int, int], hop: int, win: int, rate: int
) -> tuple[np.ndarray, np.ndarray]:
    """Cycle marks (positions, amplitudes) inside one voiced run.

    Marks are predicted one period ahead from the frame-level pitch track and
    snapped to the nearest waveform extremum with parabolic interpolation, so
    period lengths and peak heights carry sub-sample precision.
    """
    i0, i1 = run
    seg_start = i0 * hop
    seg_end = min((i1 - 1) * hop + win, x.size)

    def period_at(pos: float) -> float:
        frame = int(round((pos - win / 2) / hop))
        frame = min(max(frame, i0), i1 - 1)
        return rate / f0[frame]

    t0 = period_at(seg_start)
    first = x[seg_start : seg_start + max(2, int(np.ceil(t0)))]
    if first.size < 3:
        return np.empty(0), np.empty(0)
    sign = 1.0 if np.max(first) >= np.max(-first) else -1.0
    y = sign * x

    m = seg_start + int(np.argmax(y[seg_start : seg_start + int(np.ceil(t0))]))
    pos, amp = _refine_extremum(y, m)
    marks = [pos]
    amps = [amp]
    max_marks = int((seg_end - seg_start) / 2) + 2
    while len(marks) < max_marks:
        period = period_at(marks[-1])
        predicted = marks[-1] + period
        lo = int(np.floor(predicted - period / 4))
        hi = int(np.ceil(predicted + period / 4)) + 1
        lo = max(lo, int(np.floor(marks[-1])) + 2)
        hi = min(hi, seg_end)
        if hi - lo < 3:
            break
        m = lo + int(np.argmax(y[lo:hi]))
        pos, amp = _refine_extremum(y, m)
        if pos <= marks[-1] + 1.0:
            break
        marks.append(pos)
        amps.append(amp)
    return np.asarray(marks), np.asarray(amps)


def _jitter_shimmer(
    x: np.ndarray,
    f0: np.ndarray,
    voiced: np.ndarray,
    hop: int,
    win: int,
    rate: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame local jitter and shimmer (dB), constant across each voiced run.

    Jitter is mean |T_i - T_{i-1}| / mean T over consecutive cycle lengths;
    shimmer is mean |20 log10(A_{i+1} / A_i)| over consecutive cycle peaks.
    Runs with fewer than three measured cycles contribute nothing.
    """
    jitter = np.zeros(f0.size)
    shimmer = np.zeros(f0.size)
    for run in _voiced_runs(voiced):
        marks, amps = _track_period_marks(x, f0, run, hop, win, rate)
        periods = np.diff(marks)
        if periods.size < 3:
            continue
        dperiod = np.abs(np.diff(periods))
        jit = float(np.mean(dperiod) / np.mean(periods))
        good = (amps[:-1] > _EPS) & (amps[1:] > _EPS)
        if np.any(good):
            ratios = amps[1:][good] / amps[:-1][good]
            shim = float(np.mean(np.abs(20.0 * np.log10(ratios))))
        else:
            shim = 0.0
        jitter[run[0] : run[1]] = jit
        shimmer[run[0] : run[1]] = shim
    return jitter, shimmer


def _mel_filterbank(n_mels: int, nfft: int, rate: int, fmin: float) -> np.ndarray:
    """Triangular filters on the mel scale, (n_mels, nfft//2 + 1)."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    fmax = rate / 2.0
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bins = np.fft.rfftfreq(nfft, 1.0 / rate)
    bank = np.zeros((n_mels, bins.size))
    for i in range(n_mels):
        left, center, right = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (bins - left) / max(center - left, _EPS)
        down = (right - bins) / max(right - center, _EPS)
        bank[i] = np.maximum(0.0, np.minimum(up, down))
    return bank


def _band_slopes(db: np.ndarray, freqs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Least-squares slope of dB magnitude against frequency within [lo, hi]."""
    sel = (freqs >= lo) & (freqs <= hi)
    f = freqs[sel]
    f_c = f - f.mean()
    denom = float(np.sum(f_c * f_c))
    if denom <= 0.0:
        return np.zeros(db.shape[0])
    return (db[:, sel] @ f_c) / denom


def _pitch_frames(x: np.ndarray, n_frames: int, hop: int, pitch_win: int) -> np.ndarray:
    """Frames on the shared hop grid with a longer window, zero-padded at the tail."""
    out = np.zeros((n_frames, pitch_win))
    for t in range(n_frames):
        seg = x[t * hop : t * hop + pitch_win]
        out[t, : seg.size] = seg
    return out


def extract_llds(clip: AudioClip, cfg: FeatureConfig | None = None) -> LldMatrix:
    """Fill every descriptor channel for a preprocessed (16 kHz mono) clip."""
    cfg = cfg or FeatureConfig()
    series = frame_signal(clip, cfg.win_ms, cfg.hop_ms)
    frames = series.frames
    rate = clip.sample_rate
    win = frames.shape[1]
    hop = int(round(cfg.hop_ms * rate / 1000.0))
    n_frames = frames.shape[0]
    x = clip.samples

    pitch_win = int(round(cfg.pitch_win_ms * rate / 1000.0))
    f0, voiced, peak = _f0_autocorr(
        _pitch_frames(x, n_frames, hop, pitch_win), rate, cfg.f_min, cfg.f_max, cfg.voicing_threshold
    )

    r = np.clip(peak, 0.0, 1.0 - 1e-9)
    hnr = np.full(n_frames, -20.0)
    pos = r > 0.0
    hnr[pos] = 10.0 * np.log10(r[pos] / (1.0 - r[pos]))
    hnr = np.clip(hnr, -20.0, 40.0)

    rms = np.sqrt(np.mean(frames * frames, axis=1))
    log_energy = 20.0 * np.log10(rms + _EPS)

    signs = np.sign(frames)
    signs[signs == 0] = 1.0
    zcr = np.sum(np.abs(np.diff(signs, axis=1)) > 0, axis=1) / (win - 1)

    nfft = 1 << int(np.ceil(np.log2(win)))
    windowed = frames * np.hamming(win)
    mag = np.abs(np.fft.rfft(windowed, nfft, axis=1))
    freqs = np.fft.rfftfreq(nfft, 1.0 / rate)
    power = mag * mag

    def band_energy(lo, hi):
        sel = (freqs > lo) & (freqs <= hi)
        return np.sum(power[:, sel], axis=1)

    alpha = 10.0 * np.log10((band_energy(50.0, 1000.0) + _EPS) / (band_energy(1000.0, 5000.0) + _EPS))

    low_sel = (freqs >= 0.0) & (freqs <= 2000.0)
    high_sel = (freqs > 2000.0) & (freqs <= 5000.0)
    hammarberg = 20.0 * np.log10(
        (np.max(mag[:, low_sel], axis=1) + _EPS) / (np.max(mag[:, high_sel], axis=1) + _EPS)
    )

    db = 20.0 * np.log10(mag + _EPS)
    slope_low = _band_slopes(db, freqs, 0.0, 500.0)
    slope_mid = _band_slopes(db, freqs, 500.0, 1500.0)

    mag_sum = np.sum(mag, axis=1)
    centroid = np.where(mag_sum > _EPS, (mag @ freqs) / np.maximum(mag_sum, _EPS), 0.0)

    norm = mag / np.maximum(mag_sum[:, None], _EPS)
    flux = np.zeros(n_frames)
    if n_frames > 1:
        flux[1:] = np.sqrt(np.sum(np.diff(norm, axis=0) ** 2, axis=1))

    bank = _mel_filterbank(cfg.n_mels, nfft, rate, cfg.mel_fmin)
    mel_energy = np.log(power @ bank.T + _EPS)
    mfcc = dct(mel_energy, type=2, norm="ortho", axis=1)[:, 1 : cfg.n_mfcc + 1]

    jitter, shimmer = _jitter_shimmer(x, f0, voiced, hop, win, rate)

    rows = [
        f0,
        np.clip(peak, 0.0, 1.0),
        rms,
        log_energy,
        jitter,
        shimmer,
        hnr,
        alpha,
        hammarberg,
        slope_low,
        slope_mid,
        centroid,
        flux,
        zcr,
    ] + [mfcc[:, i] for i in range(cfg.n_mfcc)]
    values = np.vstack(rows)
    if not np.all(np.isfinite(values)):
        bad = [CHANNEL_NAMES[i] for i in np.unique(np.where(~np.isfinite(values))[0])]
        raise NotFinite(f"non-finite descriptor values in channels {bad}")
    return LldMatrix(channel_names=CHANNEL_NAMES, values=values, voiced_mask=voiced)


# ---------------------------------------------------------------------------
# Functionals


def _std(v):
    return float(np.std(v))


def _skewness(v):
    s = np.std(v)
    if s < _EPS:
        return 0.0
    return float(np.mean(((v - np.mean(v)) / s) ** 3))


def _kurtosis(v):
    s = np.std(v)
    if s < _EPS:
        return 0.0
    return float(np.mean(((v - np.mean(v)) / s) ** 4) - 3.0)


def _linfit(v):
    n = v.size
    if n < 2:
        return 0.0, float(v[0]) if n else 0.0, 0.0
    i = np.arange(n, dtype=np.float64)
    i_c = i - i.mean()
    slope = float(np.dot(i_c, v) / np.dot(i_c, i_c))
    offset = float(np.mean(v) - slope * i.mean())
    resid = v - (slope * i + offset)
    return slope, offset, float(np.mean(resid * resid))


def _diffs(v):
    return np.diff(v) if v.size > 1 else np.empty(0)


def _mean_rising(v):
    d = _diffs(v)
    d = d[d > 0]
    return float(np.mean(d)) if d.size else 0.0


def _mean_falling(v):
    d = _diffs(v)
    d = d[d < 0]
    return float(np.mean(d)) if d.size else 0.0


def _rising_fraction(v):
    d = _diffs(v)
    return float(np.mean(d > 0)) if d.size else 0.0


_FUNCTIONALS = {
    "mean": lambda v: float(np.mean(v)),
    "stddev": _std,
    "skewness": _skewness,
    "kurtosis": _kurtosis,
    "min": lambda v: float(np.min(v)),
    "max": lambda v: float(np.max(v)),
    "range": lambda v: float(np.max(v) - np.min(v)),
    "percentile5": lambda v: float(np.percentile(v, 5)),
    "percentile20": lambda v: float(np.percentile(v, 20)),
    "percentile50": lambda v: float(np.percentile(v, 50)),
    "percentile80": lambda v: float(np.percentile(v, 80)),
    "percentile95": lambda v: float(np.percentile(v, 95)),
    "range20_80": lambda v: float(np.percentile(v, 80) - np.percentile(v, 20)),
    "range5_95": lambda v: float(np.percentile(v, 95) - np.percentile(v, 5)),
    "linear_slope": lambda v: _linfit(v)[0],
    "linear_offset": lambda v: _linfit(v)[1],
    "linear_mse": lambda v: _linfit(v)[2],
    "mean_rising_slope": _mean_rising,
    "mean_falling_slope": _mean_falling,
    "rising_fraction": _rising_fraction,
    "mean_abs_delta": lambda v: float(np.mean(np.abs(_diffs(v)))) if v.size > 1 else 0.0,
    "rms": lambda v: float(np.sqrt(np.mean(v * v))),
}

# Functionals of the voicing mask rather than of a channel contour.
_MASK_FUNCTIONALS = {
    "voiced_fraction": lambda mask: float(np.mean(mask)) if mask.size else 0.0,
}

# Brute-force bank: every functional, in a fixed order.
BRUTE_BANK = FunctionalBank(
    (
        "mean",
        "stddev",
        "skewness",
        "kurtosis",
        "min",
        "max",
        "range",
        "percentile5",
        "percentile20",
        "percentile50",
        "percentile80",
        "percentile95",
        "range20_80",
        "range5_95",
        "linear_slope",
        "linear_offset",
        "linear_mse",
        "mean_rising_slope",
        "mean_falling_slope",
        "rising_fraction",
        "mean_abs_delta",
        "rms",
    )
)

# Curated compact schema: (channel, functionals applied to it). Together with
# the three durational features this yields exactly 88 values.
_COMPACT_CONTOUR_FUNCS = (
    "mean",
    "stddev",
    "min",
    "max",
    "percentile20",
    "percentile50",
    "percentile80",
    "range20_80",
    "linear_slope",
    "mean_rising_slope",
)
_COMPACT_PAIRS = (
    ("f0_hz", _COMPACT_CONTOUR_FUNCS),
    ("rms_energy", _COMPACT_CONTOUR_FUNCS),
    ("log_energy", ("mean", "stddev")),
    ("voicing_prob", ("mean", "stddev")),
    ("jitter_local", ("mean", "stddev")),
    ("shimmer_local_db", ("mean", "stddev")),
    ("hnr_db", ("mean", "stddev", "percentile20", "percentile80")),
    ("alpha_ratio_db", ("mean", "stddev")),
    ("hammarberg_db", ("mean", "stddev")),
    ("spectral_slope_0_500", ("mean", "stddev")),
    ("spectral_slope_500_1500", ("mean", "stddev")),
    ("spectral_centroid_hz", ("mean", "stddev")),
    ("spectral_flux", ("mean", "stddev")),
    ("zcr", ("mean", "stddev")),
) + tuple((f"mfcc_{i}", ("mean", "stddev", "linear_slope")) for i in range(1, 14))

PRESETS = ("compact", "brute")


def _contour_feature_names(preset: str) -> list[str]:
    names: list[str] = []
    if preset == "compact":
        for channel, funcs in _COMPACT_PAIRS:
            names.extend(f"{channel}__{f}" for f in funcs)
    else:
        contours = list(CHANNEL_NAMES) + [f"de_{c}" for c in CHANNEL_NAMES]
        for channel in contours:
            names.extend(f"{channel}__{f}" for f in BRUTE_BANK.names)
    return names


def preset_descriptor(preset: str) -> FeatureDescriptor:
    """Stable, ordered feature schema for a preset."""
    if preset not in PRESETS:
        raise UnknownPreset(f"preset must be one of {PRESETS}, got {preset!r}")
    names = _contour_feature_names(preset) + list(DURATIONAL_NAMES)
    return FeatureDescriptor(preset=preset, names=tuple(names))


def _channel_values(lld: LldMatrix, name: str) -> tuple[np.ndarray, bool]:
    """Contour for a (possibly delta) channel plus its voiced-only flag."""
    base = name[3:] if name.startswith("de_") else name
    row = lld.values[lld.channel_names.index(base)]
    if name.startswith("de_"):
        row = np.diff(row, prepend=row[0])
    return row, base in VOICED_ONLY_CHANNELS


def _apply_bank(contour: np.ndarray, voiced_only: bool, mask: np.ndarray, bank_names) -> list[float]:
    if voiced_only and not np.any(mask):
        return [0.0] * len(bank_names)
    selected = contour[mask] if voiced_only else contour
    return [
        _MASK_FUNCTIONALS[f](mask) if f in _MASK_FUNCTIONALS else _FUNCTIONALS[f](selected)
        for f in bank_names
    ]


def apply_functionals(lld: LldMatrix, bank: FunctionalBank) -> np.ndarray:
    """Collapse every channel contour with the bank, channel-major order.

    Pitch and voice-quality channels are summarized over voiced frames only
    and fall back to zeros when nothing is voiced.
    """
    if lld.values.shape[1] < 1:
        raise ValueError("need at least one frame")
    out: list[float] = []
    for name in lld.channel_names:
        contour, voiced_only = _channel_values(lld, name)
        out.extend(_apply_bank(contour, voiced_only, lld.voiced_mask, bank.names))
    return np.asarray(out)


def _durational_features(lld: LldMatrix, clip: AudioClip, cfg: FeatureConfig) -> list[float]:
    mask = lld.voiced_mask
    voiced_fraction = float(np.mean(mask)) if mask.size else 0.0
    runs = _voiced_runs(mask)
    hop_s = cfg.hop_ms / 1000.0
    mean_len = float(np.mean([(b - a) * hop_s for a, b in runs])) if runs else 0.0
    return [voiced_fraction, mean_len, clip.duration_s]


def extract_features(
    clip: AudioClip,
    preset: str = "compact",
    cfg: FeatureConfig | None = None,
    utterance_id: str = "",
) -> FeatureVector:
    """Fixed-dimension utterance vector for the given preset.

    The output order and length always match `preset_descriptor(preset)`.
    """
    cfg = cfg or FeatureConfig()
    descriptor = preset_descriptor(preset)
    lld = extract_llds(clip, cfg)

    values: list[float] = []
    if preset == "compact":
        for channel, funcs in _COMPACT_PAIRS:
            contour, voiced_only = _channel_values(lld, channel)
            values.extend(_apply_bank(contour, voiced_only, lld.voiced_mask, funcs))
    else:
        contours = list(CHANNEL_NAMES) + [f"de_{c}" for c in CHANNEL_NAMES]
        for channel in contours:
            contour, voiced_only = _channel_values(lld, channel)
            values.extend(_apply_bank(contour, voiced_only, lld.voiced_mask, BRUTE_BANK.names))
    values.extend(_durational_features(lld, clip, cfg))

    vec = np.asarray(values)
    if vec.size != descriptor.dimension:
        raise AssertionError(
            f"feature count {vec.size} does not match descriptor {descriptor.dimension}"
        )
    return FeatureVector(utterance_id=utterance_id, values=vec, descriptor=descriptor)


class FeatureExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer turning a list of clips into a feature matrix."""

    def __init__(self, preset: str = "compact"):
        self.preset = preset

    def fit(self, X=None, y=None):
        preset_descriptor(self.preset)  # validates the preset name
        return self

    def transform(self, X):
        return np.vstack([extract_features(clip, self.preset).values for clip in X])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(preset_descriptor(self.preset).names, dtype=object)
