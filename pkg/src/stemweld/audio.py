"""WAV reading/writing and sample-rate conversion for stem buffers.

Audio is held as float64 arrays shaped (channels, samples) with nominal
amplitudes in [-1, 1]. Only plain little-endian RIFF/WAVE files are handled:
PCM 16-bit, PCM 24-bit and IEEE float32, mono or stereo.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VOCALS = "vocals"
ACCOMPANIMENT = "accompaniment"
ROLES = (VOCALS, ACCOMPANIMENT)

_KAISER_BETA = 8.6
_BASE_HALF_TAPS = 32  # one-sided tap count at unity ratio; widened when downsampling
_KERNEL_OVERSAMPLE = 256  # kernel table resolution, samples per tap


class WavFormatError(ValueError):
    """File is not a WAV this module can decode."""


class UnsupportedEncodingError(WavFormatError):
    pass


class TruncatedFileError(WavFormatError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    """Multichannel audio. Treat as immutable once constructed."""

    samples: np.ndarray  # float64, shape (channels, n_samples)
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
        if arr.shape[0] not in (1, 2):
            raise ValueError(f"only 1 or 2 channels supported, got {arr.shape[0]}")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @staticmethod
    def mono(x: np.ndarray, sample_rate: int) -> "AudioBuffer":
        return AudioBuffer(np.asarray(x, dtype=np.float64)[np.newaxis, :], sample_rate)

    def to_stereo(self) -> "AudioBuffer":
        """Duplicate the channel if mono; no-op for stereo."""
        if self.channels == 2:
            return self
        return AudioBuffer(np.vstack([self.samples[0], self.samples[0]]), self.sample_rate)

    @property
    def peak(self) -> float:
        if self.n_samples == 0:
            return 0.0
        return float(np.max(np.abs(self.samples)))


@dataclass(frozen=True)
class Stem:
    """One separated component of a song: vocals or accompaniment."""

    song_id: str
    role: str
    audio: AudioBuffer

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class WavWriteInfo:
    """Metadata returned by write_wav: clipping report for the written file."""

    clipped: bool
    n_clipped: int
    peak: float


def read_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file into an AudioBuffer.

    Supports PCM16, PCM24 and IEEE float32, 1-2 channels. Integer samples are
    normalized by full scale (so int16 -32768 maps to -1.0).
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    raw = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            if len(body) < size:
                raise TruncatedFileError(
                    f"{path}: data chunk declares {size} bytes, only {len(body)} present"
                )
            raw = body
        pos += 8 + size + (size & 1)

    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if raw is None:
        raise WavFormatError(f"{path}: missing data chunk")

    audio_format, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{path}: {channels} channels not supported")
    if block_align:
        raw = raw[: (len(raw) // block_align) * block_align]

    if audio_format == 1 and bits == 16:
        ints = np.frombuffer(raw, dtype="<i2").astype(np.float64)
        flat = ints / 32768.0
    elif audio_format == 1 and bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8)
        b = b[: (len(b) // 3) * 3].reshape(-1, 3).astype(np.int64)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        flat = ints.astype(np.float64) / float(1 << 23)
    elif audio_format == 3 and bits == 32:
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {audio_format} with {bits} bits not supported"
        )

    frames = flat.reshape(-1, channels)
    return AudioBuffer(frames.T.copy(), rate)


def write_wav(buffer: AudioBuffer, path, bit_depth: str = "pcm16") -> WavWriteInfo:
    """Write an AudioBuffer as WAV; returns clipping metadata.

    pcm16 clamps out-of-range samples to full scale (never wraps); float32
    writes samples as-is.
    """
    if bit_depth not in ("pcm16", "float32"):
        raise ValueError(f"bit_depth must be 'pcm16' or 'float32', got {bit_depth!r}")

    interleaved = buffer.samples.T.reshape(-1)
    peak = float(np.max(np.abs(interleaved))) if interleaved.size else 0.0

    if bit_depth == "pcm16":
        over = np.abs(interleaved) > 1.0
        n_clipped = int(np.count_nonzero(over))
        # Scale matches the reader's /32768 so quantization error stays
        # within 2^-15; +1.0 clamps to 32767 (one lsb short of full scale).
        ints = np.clip(np.round(interleaved * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
        audio_format, bits = 1, 16
    else:
        n_clipped = 0
        payload = interleaved.astype("<f4").tobytes()
        audio_format, bits = 3, 32

    ch = buffer.channels
    block_align = ch * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, audio_format, ch, buffer.sample_rate,
        buffer.sample_rate * block_align, block_align, bits,
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)
    return WavWriteInfo(clipped=n_clipped > 0, n_clipped=n_clipped, peak=peak)


def _sinc_kernel_table(half: int, cutoff: float):
    """Tabulated windowed-sinc kernel: cutoff * sinc(cutoff*t) * kaiser(t/half)."""
    step = 1.0 / _KERNEL_OVERSAMPLE
    t = np.arange(-(half + 1), half + 1 + step, step)
    u = t / half
    window = np.zeros_like(t)
    inside = np.abs(u) <= 1.0
    window[inside] = np.i0(_KAISER_BETA * np.sqrt(1.0 - u[inside] ** 2)) / np.i0(_KAISER_BETA)
    return t[0], step, cutoff * np.sinc(cutoff * t) * window


def _resample_channel(x: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    ratio = dst_rate / src_rate
    n_out = int(round(len(x) * ratio))
    if n_out == 0 or len(x) == 0:
        return np.zeros(n_out, dtype=np.float64)

    # Cutoff relative to source Nyquist; widen the kernel when downsampling
    # so the stretched sinc keeps enough taps for anti-aliasing.
    cutoff = min(1.0, ratio)
    half = int(np.ceil(_BASE_HALF_TAPS / cutoff))
    t0, step, table = _sinc_kernel_table(half, cutoff)

    pos = np.arange(n_out, dtype=np.float64) / ratio
    centers = np.floor(pos).astype(np.int64)
    frac = pos - centers

    pad = half + 2
    xp = np.pad(x, (pad, pad))
    acc = np.zeros(n_out, dtype=np.float64)
    wsum = np.zeros(n_out, dtype=np.float64)
    for j in range(-half, half + 1):
        t = j - frac
        fidx = (t - t0) / step
        i0 = fidx.astype(np.int64)
        a = fidx - i0
        w = table[i0] * (1.0 - a) + table[i0 + 1] * a
        acc += xp[centers + j + pad] * w
        wsum += w
    # Per-sample gain correction: exact DC response, no passband ripple.
    return acc / np.maximum(wsum, 1e-12)


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Windowed-sinc (Kaiser) resampling to target_rate.

    Output length is round(n * target/source); a pure tone below 0.4x the
    smaller Nyquist keeps its frequency within 1%.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == buffer.sample_rate:
        return buffer
    out = np.vstack([
        _resample_channel(buffer.samples[c], buffer.sample_rate, target_rate)
        for c in range(buffer.channels)
    ])
    return AudioBuffer(out, target_rate)
