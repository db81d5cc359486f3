import numpy as np
import pytest

from serbench.audio_io import AudioClip


def make_tone(freq_hz, duration_s=1.0, rate=16000, amplitude=0.8, phase=0.0):
    t = np.arange(int(round(duration_s * rate))) / rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), rate, 1)


def make_padded_burst(freq_hz=220.0, rate=16000, pad_s=0.5, burst_s=0.5, amplitude=0.9):
    """Tone burst surrounded by exact zeros; returns (clip, burst_start, burst_end)."""
    pad = np.zeros(int(pad_s * rate))
    t = np.arange(int(burst_s * rate)) / rate
    burst = amplitude * np.sin(2 * np.pi * freq_hz * t)
    x = np.concatenate([pad, burst, pad])
    return AudioClip(x, rate, 1), pad.size, pad.size + burst.size


@pytest.fixture
def tone_220():
    return make_tone(220.0)
