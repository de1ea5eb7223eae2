"""Shared fixtures and measurement oracles.

The oracles here (FFT peak picking, onset detection) are deliberately
independent of the library's signal path: they look only at raw sample arrays.
"""
import numpy as np
import pytest

from stemweld.audio import AudioBuffer
from stemweld.fixtures import major_key
from stemweld.library import Key, Segment, TrackAnalysis


def sine(freq: float, duration: float, sr: int, amp: float = 0.5) -> AudioBuffer:
    t = np.arange(int(round(duration * sr))) / sr
    return AudioBuffer.mono(amp * np.sin(2.0 * np.pi * freq * t), sr)


def peak_frequency(buf: AudioBuffer) -> float:
    """Dominant frequency from a windowed FFT with parabolic interpolation."""
    x = buf.samples[0]
    w = np.hanning(len(x))
    spectrum = np.abs(np.fft.rfft(x * w))
    lo = max(2, int(20 * len(x) / buf.sample_rate))  # ignore DC and subsonic bins
    k = int(np.argmax(spectrum[lo:])) + lo
    if 0 < k < len(spectrum) - 1:
        a, b, c = spectrum[k - 1], spectrum[k], spectrum[k + 1]
        denom = a - 2 * b + c
        if denom != 0:
            k = k + 0.5 * (a - c) / denom
    return k * buf.sample_rate / len(x)


def detect_onsets(x: np.ndarray, sr: int, min_gap_s: float = 0.2,
                  rel_threshold: float = 0.25) -> np.ndarray:
    """Click onset times: threshold crossings separated by min_gap_s."""
    ax = np.abs(np.asarray(x))
    if ax.max() == 0:
        return np.zeros(0)
    above = np.where(ax > rel_threshold * ax.max())[0]
    found = []
    for i in above:
        if not found or i - found[-1] > min_gap_s * sr:
            found.append(i)
    return np.array(found) / sr


def grid_track(song_id: str, bpm: float, segs, key: Key | None = None,
               beats_per_bar: int = 4) -> TrackAnalysis:
    """Metronome-grid analysis with explicit (start, end, label) segments; the
    duration is the last segment end rounded up to a whole beat."""
    period = 60.0 / bpm
    end = max(e for _, e, _ in segs)
    n_beats = int(np.ceil(end / period - 1e-9))
    return TrackAnalysis(
        song_id=song_id,
        bpm=bpm,
        beats=tuple(k * period for k in range(n_beats)),
        downbeats=tuple(k * period for k in range(0, n_beats, beats_per_bar)),
        key=key or major_key("C"),
        duration=end,
        segments=tuple(Segment(s, e, label) for s, e, label in segs),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
