"""WAV loading/saving and the standard preprocessing chain.

Preprocessing applies, in order: stereo-to-mono downmix, edge silence trim,
polyphase resampling to the target rate, and peak normalization. All
operations are pure functions of their inputs.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import upfirdn

from .errors import (
    CorruptHeader,
    EmptyAfterTrim,
    InvalidRate,
    NotMono,
    UnsupportedFormat,
)

# Resampler kernel: windowed sinc, Kaiser beta 8.6, 64 zero crossings per side.
KAISER_BETA = 8.6
ZERO_CROSSINGS = 64

_WAVE_PCM = 1
_WAVE_FLOAT = 3


@dataclass
class AudioClip:
    """Sample buffer plus rate. Stereo samples are interleaved L,R,L,R,..."""

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise InvalidRate(f"sample_rate must be positive, got {self.sample_rate}")
        if self.channels not in (1, 2):
            raise UnsupportedFormat(f"only 1 or 2 channels supported, got {self.channels}")
        if self.samples.ndim != 1 or self.samples.size % self.channels != 0:
            raise CorruptHeader("sample buffer length not divisible by channel count")

    @property
    def n_frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate


@dataclass
class PreprocessConfig:
    target_rate: int = 16000
    peak_target: float = 0.99
    trim_threshold_db: float = -40.0
    trim_frame_ms: float = 25.0
    trim_hop_ms: float = 10.0

    def __post_init__(self):
        if self.target_rate <= 0:
            raise InvalidRate(f"target_rate must be positive, got {self.target_rate}")
        if not 0.0 < self.peak_target <= 1.0:
            raise ValueError(f"peak_target must be in (0, 1], got {self.peak_target}")
        if self.trim_threshold_db >= 0:
            raise ValueError("trim_threshold_db must be negative (relative to clip peak)")


def load_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE-float samples.

    Integer samples are scaled to [-1, 1] by dividing by 32768, so the most
    negative 16-bit value maps to -1.0 exactly.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise CorruptHeader(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if size < 16:
                raise CorruptHeader(f"{path}: fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {channels} channels unsupported")
    if rate <= 0:
        raise CorruptHeader(f"{path}: nonpositive sample rate")

    if tag == _WAVE_PCM and bits == 16:
        width = 2
        if len(payload) % (width * channels):
            raise CorruptHeader(f"{path}: data size not a multiple of the frame size")
        raw = np.frombuffer(payload, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif tag == _WAVE_FLOAT and bits == 32:
        width = 4
        if len(payload) % (width * channels):
            raise CorruptHeader(f"{path}: data size not a multiple of the frame size")
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise CorruptHeader(f"{path}: non-finite float samples")
    else:
        raise UnsupportedFormat(f"{path}: format tag {tag} with {bits}-bit samples unsupported")

    return AudioClip(samples=samples, sample_rate=int(rate), channels=int(channels))


def save_wav(clip: AudioClip, path) -> None:
    """Write a clip as 32-bit IEEE-float WAV."""
    data = clip.samples.astype("<f4").tobytes()
    width = 4
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FLOAT,
        clip.channels,
        clip.sample_rate,
        clip.sample_rate * clip.channels * width,
        clip.channels * width,
        8 * width,
        b"data",
        len(data),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def downmix(clip: AudioClip) -> AudioClip:
    """Average interleaved stereo channels; mono clips pass through copied."""
    if clip.channels == 1:
        return AudioClip(clip.samples.copy(), clip.sample_rate, 1)
    mono = clip.samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(mono, clip.sample_rate, 1)


def _frame_rms(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """RMS of every full analysis frame; a short signal is one frame."""
    n = x.size
    if n < win:
        return np.sqrt(np.array([np.mean(x * x)]))
    n_frames = (n - win) // hop + 1
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    starts = np.arange(n_frames) * hop
    energy = csum[starts + win] - csum[starts]
    return np.sqrt(energy / win)


def trim_silence(clip: AudioClip, cfg: PreprocessConfig | None = None) -> AudioClip:
    """Drop leading/trailing frames whose RMS sits below peak + threshold dB.

    Returns the contiguous slice from the start of the first frame above the
    threshold to the end of the last one; interior samples are never removed.
    A clip whose first and last frames both pass is returned unchanged.
    """
    cfg = cfg or PreprocessConfig()
    if clip.channels != 1:
        raise NotMono("trim_silence requires a mono clip")
    x = clip.samples
    if x.size == 0:
        raise EmptyAfterTrim("empty clip")
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise EmptyAfterTrim("all-zero clip")

    win = max(1, round(cfg.trim_frame_ms * clip.sample_rate / 1000.0))
    hop = max(1, round(cfg.trim_hop_ms * clip.sample_rate / 1000.0))
    rms = _frame_rms(x, win, hop)
    threshold = peak * 10.0 ** (cfg.trim_threshold_db / 20.0)
    passing = np.flatnonzero(rms > threshold)
    if passing.size == 0:
        raise EmptyAfterTrim("no frame above the silence threshold")

    first, last = int(passing[0]), int(passing[-1])
    start = first * hop
    end = x.size if last == rms.size - 1 else last * hop + win
    return AudioClip(x[start:end].copy(), clip.sample_rate, 1)


_kernel_cache: dict[tuple[int, int], np.ndarray] = {}


def _resample_kernel(up: int, down: int) -> np.ndarray:
    key = (up, down)
    h = _kernel_cache.get(key)
    if h is None:
        max_rate = max(up, down)
        half = ZERO_CROSSINGS * max_rate
        n = np.arange(-half, half + 1)
        cutoff = 1.0 / max_rate  # relative to Nyquist at the upsampled rate
        h = up * cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half + 1, KAISER_BETA)
        _kernel_cache[key] = h
    return h


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

    Output length is round(input_length * target / source), so durations are
    preserved. The cutoff sits at the lower of the two Nyquist frequencies.
    """
    if not isinstance(target_rate, (int, np.integer)) or target_rate <= 0:
        raise InvalidRate(f"target_rate must be a positive integer, got {target_rate!r}")
    if clip.channels != 1:
        raise NotMono("resample requires a mono clip")
    src = clip.sample_rate
    if target_rate == src:
        return AudioClip(clip.samples.copy(), src, 1)

    g = math.gcd(src, int(target_rate))
    up, down = int(target_rate) // g, src // g
    x = clip.samples
    n_out = math.floor(x.size * up / down + 0.5)

    h = _resample_kernel(up, down)
    half = (h.size - 1) // 2
    # Zero-prepend the kernel so the group delay lands on the output grid.
    n_pre = (-half) % down
    n_skip = (half + n_pre) // down
    hp = np.concatenate((np.zeros(n_pre), h)) if n_pre else h
    y = upfirdn(hp, x, up, down)
    need = n_skip + n_out
    if y.size < need:
        pad = math.ceil((need - y.size) * down / up) + 1
        y = upfirdn(hp, np.concatenate((x, np.zeros(pad))), up, down)
    return AudioClip(y[n_skip:need], int(target_rate), 1)


def preprocess(clip: AudioClip, cfg: PreprocessConfig | None = None) -> AudioClip:
    """Downmix, trim edge silence, resample, then normalize to the target peak."""
    cfg = cfg or PreprocessConfig()
    mono = downmix(clip)
    trimmed = trim_silence(mono, cfg)
    out = resample(trimmed, cfg.target_rate)
    peak = float(np.max(np.abs(out.samples)))
    if peak == 0.0:
        raise EmptyAfterTrim("clip vanished during resampling")
    return AudioClip(out.samples * (cfg.peak_target / peak), cfg.target_rate, 1)
