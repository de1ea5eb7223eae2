"""Pitch-preserving time-scale modification and beat-grid warping.

The stretch algorithm is waveform-similarity overlap-add (WSOLA): synthesis
frames are taken every synthesis_hop samples of output, each sourced from the
input near its nominal position, nudged within +-search_radius to best
continue the previously copied frame. Pitch shifting combines a resample with
a compensating stretch. Warp maps express piecewise-linear time mappings from
donor time to base time, anchored on downbeats and beats.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import AudioBuffer, resample

MIN_STRETCH_RATIO = 0.25
MAX_STRETCH_RATIO = 4.0
_COINCIDENT = 1e-6  # seconds; grid timestamps closer than this are one point


class TsmRangeError(ValueError):
    """Requested stretch ratio or pitch shift outside the supported range."""


class WarpMapError(ValueError):
    """Warp map construction failed or map does not fit the audio."""


@dataclass(frozen=True)
class TsmParams:
    """WSOLA frame geometry, all in samples at the working rate."""

    frame_length: int
    synthesis_hop: int
    search_radius: int

    def __post_init__(self):
        if not 0 < self.synthesis_hop < self.frame_length:
            raise ValueError("need 0 < synthesis_hop < frame_length")
        if not 0 <= self.search_radius < self.synthesis_hop:
            raise ValueError("need search_radius < synthesis_hop")

    @classmethod
    def for_sample_rate(cls, sample_rate: int, frame_ms: float = 50.0,
                        hop_ms: float = 12.5, radius_ms: float = 10.0) -> "TsmParams":
        return cls(
            frame_length=max(4, int(round(sample_rate * frame_ms / 1000.0))),
            synthesis_hop=max(2, int(round(sample_rate * hop_ms / 1000.0))),
            search_radius=max(1, int(round(sample_rate * radius_ms / 1000.0))),
        )


@dataclass(frozen=True)
class WarpMap:
    """Monotone piecewise-linear map from source (donor) time to target (base) time."""

    anchors: tuple  # ((source_s, target_s), ...) sorted by source

    def __post_init__(self):
        anchors = tuple((float(s), float(t)) for s, t in self.anchors)
        if len(anchors) < 2:
            raise WarpMapError("warp map needs at least 2 anchors")
        for (s0, t0), (s1, t1) in zip(anchors, anchors[1:]):
            if s1 <= s0 or t1 <= t0:
                raise WarpMapError(
                    f"anchors must be strictly increasing on both axes: "
                    f"({s0},{t0}) -> ({s1},{t1})"
                )
        object.__setattr__(self, "anchors", anchors)

    @property
    def source_span(self) -> tuple:
        return (self.anchors[0][0], self.anchors[-1][0])

    @property
    def target_span(self) -> tuple:
        return (self.anchors[0][1], self.anchors[-1][1])

    @property
    def target_duration(self) -> float:
        return self.anchors[-1][1] - self.anchors[0][1]

    @classmethod
    def linear(cls, source_start: float, source_end: float,
               target_start: float, target_end: float) -> "WarpMap":
        return cls(((source_start, target_start), (source_end, target_end)))

    def is_identity(self, tol: float = 1e-9) -> bool:
        span_shift = self.anchors[0][1] - self.anchors[0][0]
        return all(abs((t - s) - span_shift) <= tol for s, t in self.anchors)


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _wsola_channel(x: np.ndarray, n_out: int, n_frame: int, hop: int,
                   radius: int) -> np.ndarray:
    """Stretch x to exactly n_out samples."""
    n_in = len(x)
    if n_out <= 0:
        return np.zeros(0, dtype=np.float64)
    if n_in == 0:
        return np.zeros(n_out, dtype=np.float64)
    if n_out == n_in:
        return x.copy()

    ratio = n_out / n_in
    window = _hann_periodic(n_frame)
    pad_left = radius
    pad_right = n_frame + radius + hop + 1
    xp = np.pad(x, (pad_left, pad_right))

    n_syn = int(np.ceil(n_out / hop)) + 1
    out = np.zeros(n_syn * hop + n_frame, dtype=np.float64)
    wsum = np.zeros_like(out)

    prev_src = 0
    out[0:n_frame] += xp[pad_left:pad_left + n_frame] * window
    wsum[0:n_frame] += window

    for k in range(1, n_syn):
        t = k * hop
        nominal = int(round(t / ratio))
        nominal = min(nominal, n_in)
        template = xp[pad_left + prev_src + hop:pad_left + prev_src + hop + n_frame]
        lo = nominal - radius
        search = xp[pad_left + lo:pad_left + lo + n_frame + 2 * radius]
        corr = signal.correlate(search, template, mode="valid", method="auto")
        src = lo + int(np.argmax(corr))
        out[t:t + n_frame] += xp[pad_left + src:pad_left + src + n_frame] * window
        wsum[t:t + n_frame] += window
        prev_src = src

    return out[:n_out] / np.maximum(wsum[:n_out], 1e-9)


def _stretch_exact(x: np.ndarray, n_out: int, params: TsmParams) -> np.ndarray:
    """Stretch to an exact output length; falls back to linear interpolation
    when the segment is too short for WSOLA frames or the ratio is extreme."""
    n_in = len(x)
    if n_out <= 0:
        return np.zeros(0, dtype=np.float64)
    if n_in == 0:
        return np.zeros(n_out, dtype=np.float64)
    ratio = n_out / n_in
    short = n_in < 2 * params.frame_length or n_out < 2 * params.frame_length
    if short or not MIN_STRETCH_RATIO <= ratio <= MAX_STRETCH_RATIO:
        pos = np.arange(n_out) * ((n_in - 1) / max(n_out - 1, 1))
        return np.interp(pos, np.arange(n_in), x)
    return _wsola_channel(x, n_out, params.frame_length, params.synthesis_hop,
                          params.search_radius)


def time_stretch(audio: AudioBuffer, ratio: float,
                 params: TsmParams | None = None) -> AudioBuffer:
    """Change duration by `ratio` (output seconds per input second) at constant pitch."""
    if not MIN_STRETCH_RATIO <= ratio <= MAX_STRETCH_RATIO:
        raise TsmRangeError(
            f"ratio {ratio} outside supported range "
            f"[{MIN_STRETCH_RATIO}, {MAX_STRETCH_RATIO}]"
        )
    if ratio == 1.0:
        return audio
    if params is None:
        params = TsmParams.for_sample_rate(audio.sample_rate)
    n_out = int(round(audio.n_samples * ratio))
    out = np.vstack([
        _wsola_channel(audio.samples[c], n_out, params.frame_length,
                       params.synthesis_hop, params.search_radius)
        for c in range(audio.channels)
    ])
    return AudioBuffer(out, audio.sample_rate)


def pitch_shift(audio: AudioBuffer, semitones: float,
                params: TsmParams | None = None) -> AudioBuffer:
    """Shift pitch by `semitones` (factor 2^(s/12)) keeping duration.

    Resamples to scale the timeline, reinterprets at the original rate, then
    stretches back so the TSM pass runs at the original rate.
    """
    if abs(semitones) > 12.0:
        raise TsmRangeError(f"pitch shift {semitones} outside supported range [-12, 12]")
    if semitones == 0:
        return audio
    factor = 2.0 ** (semitones / 12.0)
    inter_rate = max(1, int(round(audio.sample_rate / factor)))
    sped = resample(audio, inter_rate)
    sped = AudioBuffer(sped.samples, audio.sample_rate)  # reinterpret: pitch * factor
    return time_stretch(sped, factor, params)


def _points_between(values, lo: float, hi: float) -> list:
    return [v for v in values if lo + _COINCIDENT < v < hi - _COINCIDENT]


def build_warp_map(donor_beats, donor_downbeats, base_beats, base_downbeats,
                   region) -> WarpMap:
    """Build the donor->base time map for one paired region.

    donor_downbeats and base_downbeats are the paired anchor grids (equal
    length, k-th to k-th); they may include region boundary points supplied by
    the caller. Beats strictly inside matching downbeat spans are paired in
    order when the counts agree; otherwise the span stays linear. If the base
    region extends past the first/last downbeat anchor, the edge is covered by
    extending the adjacent span's rate proportionally.
    """
    start, end = float(region[0]), float(region[1])
    if end <= start:
        raise WarpMapError(f"zero-length region ({start}, {end})")
    dd = sorted(float(v) for v in donor_downbeats)
    bd = sorted(float(v) for v in base_downbeats)
    if not dd or not bd:
        raise WarpMapError("empty downbeat grid")
    if len(dd) != len(bd):
        raise WarpMapError(
            f"paired downbeat counts differ: donor {len(dd)} vs base {len(bd)}"
        )

    anchors = list(zip(dd, bd))

    # Donor seconds per base second in the first/last span, used to extend
    # the map over partial leading/trailing bars.
    def edge_rate(i0: int, i1: int) -> float:
        if len(dd) >= 2:
            return (dd[i1] - dd[i0]) / (bd[i1] - bd[i0])
        return 1.0

    if start < bd[0] - _COINCIDENT:
        anchors.insert(0, (dd[0] - (bd[0] - start) * edge_rate(0, 1), start))
    if end > bd[-1] + _COINCIDENT:
        anchors.append((dd[-1] + (end - bd[-1]) * edge_rate(-2, -1), end))

    beat_anchors = []
    db = sorted(float(v) for v in donor_beats)
    bb = sorted(float(v) for v in base_beats)
    for (s0, t0), (s1, t1) in zip(anchors, anchors[1:]):
        inner_d = _points_between(db, s0, s1)
        inner_b = _points_between(bb, t0, t1)
        if inner_d and len(inner_d) == len(inner_b):
            beat_anchors.extend(zip(inner_d, inner_b))

    merged = sorted(set(anchors) | set(beat_anchors))
    deduped = [merged[0]]
    for s, t in merged[1:]:
        ps, pt = deduped[-1]
        if s - ps > _COINCIDENT and t - pt > _COINCIDENT:
            deduped.append((s, t))
    return WarpMap(tuple(deduped))


def apply_warp(audio: AudioBuffer, warp: WarpMap,
               params: TsmParams | None = None) -> AudioBuffer:
    """Warp audio through the map; output time 0 is the map's target start.

    Each anchor span is stretched independently to exactly its target length,
    so content at every anchor lands at its mapped time at full gain (WSOLA
    copies a span's first frame verbatim). Interior joins are smoothed over
    one synthesis hop: the earlier span's tail ramps out against a short
    ramped-in bridge of the next span's pre-roll. The ramps are linear because
    the two sides carry the same source material; equal-power would double it.
    """
    if params is None:
        params = TsmParams.for_sample_rate(audio.sample_rate)
    sr = audio.sample_rate
    # Upstream stretches may land a handful of samples short; tolerate less
    # than the anchor precision budget (10 ms) and clamp the reads.
    slack = int(round(0.010 * sr))
    src_idx = [int(round(s * sr)) for s, _ in warp.anchors]
    if src_idx[0] < 0 or src_idx[-1] > audio.n_samples + slack:
        raise WarpMapError(
            f"map source span [{warp.anchors[0][0]}, {warp.anchors[-1][0]}]s "
            f"outside audio of {audio.duration:.3f}s"
        )
    t0 = warp.anchors[0][1]
    dst_idx = [int(round((t - t0) * sr)) for _, t in warp.anchors]
    n_out = dst_idx[-1]
    fade = params.synthesis_hop

    spans = []
    for i in range(len(warp.anchors) - 1):
        s0, s1 = src_idx[i], min(src_idx[i + 1], audio.n_samples)
        d0, d1 = dst_idx[i], dst_idx[i + 1]
        if d1 - d0 < 1 or s1 - s0 < 1:
            continue
        spans.append((s0, s1, d0, d1))

    out = np.zeros((audio.channels, n_out), dtype=np.float64)
    if not spans:
        return AudioBuffer(out, sr)

    for c in range(audio.channels):
        x = audio.samples[c]
        for i, (s0, s1, d0, d1) in enumerate(spans):
            target_len = d1 - d0
            ratio = target_len / (s1 - s0)
            y = _stretch_exact(x[s0:s1], target_len, params)
            last = i == len(spans) - 1
            if not last and fade and target_len > fade:
                ramp_out = 1.0 - (np.arange(fade) + 1.0) / fade
                y[target_len - fade:] *= ramp_out
            out[c, d0:d1] += y[:n_out - d0]
            if i > 0 and fade:
                # Pre-roll bridge: the source just before this span, squeezed
                # at this span's ratio, rising linearly into the span start.
                pre_src = min(int(round(fade / ratio)), s0)
                bridge_len = min(fade, int(round(pre_src * ratio)), d0)
                if bridge_len >= 1 and pre_src >= 1:
                    pos = s0 - pre_src + np.arange(bridge_len) * (pre_src / bridge_len)
                    bridge = np.interp(pos, np.arange(len(x)), x)
                    bridge *= (np.arange(bridge_len) + 1.0) / bridge_len
                    out[c, d0 - bridge_len:d0] += bridge

    return AudioBuffer(out, sr)
