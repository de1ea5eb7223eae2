"""Plan execution: warp and place the donor stem, mix with the base stem,
and peak-protect the result."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import DONOR_REPEAT, MashupPlan
from .audio import AudioBuffer, Stem
from .tsm import TsmParams, apply_warp, pitch_shift

CROSSFADE_S = 0.010  # equal-power joins at donor placement junctions


class RenderError(ValueError):
    """Stems do not match the plan or a stage failed."""


@dataclass(frozen=True)
class RenderSettings:
    output_bit_depth: str = "pcm16"
    donor_gain: float = 1.0
    base_gain: float = 1.0
    normalize_peak_dbfs: float = -1.0

    def __post_init__(self):
        if self.donor_gain < 0 or self.base_gain < 0:
            raise ValueError("gains must be >= 0")
        if self.output_bit_depth not in ("pcm16", "float32"):
            raise ValueError(f"bad output_bit_depth {self.output_bit_depth!r}")


@dataclass(frozen=True)
class RenderResult:
    audio: AudioBuffer
    peak_before: float
    applied_gain: float
    normalized: bool

    def to_report(self) -> dict:
        return {
            "peak_before_normalize": self.peak_before,
            "applied_gain": self.applied_gain,
            "normalized": self.normalized,
        }


def peak_normalize(audio: AudioBuffer, target_dbfs: float) -> AudioBuffer:
    """Scale down uniformly if the peak exceeds the target; never boosts."""
    target = 10.0 ** (target_dbfs / 20.0)
    peak = audio.peak
    if peak <= target or peak == 0.0:
        return audio
    return AudioBuffer(audio.samples * (target / peak), audio.sample_rate)


def _place_segment(track: np.ndarray, warped: np.ndarray, placements,
                   sr: int, fade: int) -> None:
    """Copy warped material into the donor track per the placement schedule.

    Consecutive placements within one pairing are joined with equal-power
    crossfades: each placement is extended one fade past its end with its
    natural continuation (the loop wraps to the warped segment's start), and
    the next placement's head is ramped in against it.
    """
    n_w = warped.shape[1]
    n_track = track.shape[1]
    up = np.sin(0.5 * np.pi * (np.arange(fade) + 0.5) / fade) if fade else np.zeros(0)
    down = np.cos(0.5 * np.pi * (np.arange(fade) + 0.5) / fade) if fade else np.zeros(0)

    for i, pl in enumerate(placements):
        d0 = int(round((pl.donor_offset) * sr))
        length = int(round(pl.length * sr))
        start = int(round(pl.base_offset * sr))
        d1 = min(d0 + length, n_w)
        if d1 <= d0 or start >= n_track:
            continue
        piece = warped[:, d0:d1].copy()
        last = i == len(placements) - 1
        if i > 0 and fade:
            head = min(fade, piece.shape[1])
            piece[:, :head] *= up[:head]
        stop = min(start + piece.shape[1], n_track)
        track[:, start:stop] += piece[:, :stop - start]
        if not last and fade:
            # Natural continuation past this placement: rest of the warped
            # segment, wrapping to its start at a full-repetition seam.
            if d1 + fade <= n_w:
                tail = warped[:, d1:d1 + fade].copy()
            else:
                tail = np.concatenate(
                    [warped[:, d1:n_w], warped[:, :fade - (n_w - d1)]], axis=1
                ).copy()
            tail *= down[:tail.shape[1]]
            t0 = start + piece.shape[1]
            t1 = min(t0 + tail.shape[1], n_track)
            if t1 > t0:
                track[:, t0:t1] += tail[:, :t1 - t0]


def render(plan: MashupPlan, base_stem: Stem, donor_stem: Stem,
           settings: RenderSettings | None = None,
           params: TsmParams | None = None) -> RenderResult:
    """Execute a plan: pitch-shift and warp the donor, place per schedule,
    sum with the untouched base stem, then peak-normalize."""
    if settings is None:
        settings = RenderSettings()
    if base_stem.song_id != plan.roles.base_song_id:
        raise RenderError(
            f"base stem is {base_stem.song_id!r}, plan wants {plan.roles.base_song_id!r}"
        )
    if donor_stem.song_id != plan.roles.donor_song_id:
        raise RenderError(
            f"donor stem is {donor_stem.song_id!r}, plan wants {plan.roles.donor_song_id!r}"
        )
    if donor_stem.role != plan.roles.donor_role:
        raise RenderError(
            f"donor stem role {donor_stem.role!r} != plan role {plan.roles.donor_role!r}"
        )
    if not plan.roles.allow_self and base_stem.role == donor_stem.role:
        raise RenderError("base and donor stems carry the same role")
    if base_stem.audio.sample_rate != donor_stem.audio.sample_rate:
        raise RenderError(
            f"sample rates differ ({base_stem.audio.sample_rate} vs "
            f"{donor_stem.audio.sample_rate}); resample stems first"
        )

    sr = base_stem.audio.sample_rate
    if abs(base_stem.audio.duration - plan.output_duration) > 0.050:
        raise RenderError(
            f"base stem is {base_stem.audio.duration:.3f}s but plan says "
            f"{plan.output_duration:.3f}s"
        )

    n_ch = max(base_stem.audio.channels, donor_stem.audio.channels)
    base = base_stem.audio.to_stereo() if n_ch == 2 else base_stem.audio
    donor = donor_stem.audio.to_stereo() if n_ch == 2 else donor_stem.audio

    if params is None:
        params = TsmParams.for_sample_rate(sr)

    if plan.semitone_shift != 0 and settings.donor_gain != 0:
        n_orig = donor.n_samples
        donor = pitch_shift(donor, plan.semitone_shift, params)
        # The shift preserves duration only to within rounding; restore the
        # exact sample count so the plan's time anchors keep their meaning.
        if donor.n_samples < n_orig:
            pad = np.zeros((donor.channels, n_orig - donor.n_samples))
            donor = AudioBuffer(np.hstack([donor.samples, pad]), sr)
        elif donor.n_samples > n_orig:
            donor = AudioBuffer(donor.samples[:, :n_orig], sr)

    n_out = base.n_samples
    donor_track = np.zeros((n_ch, n_out), dtype=np.float64)
    fade = int(round(CROSSFADE_S * sr))
    if settings.donor_gain != 0:
        for pairing, wm, sched in zip(plan.pairings, plan.warp_maps, plan.schedules):
            if pairing.fill != DONOR_REPEAT:
                continue
            warped = apply_warp(donor, wm, params)
            _place_segment(donor_track, warped.samples, sched, sr, fade)

    mix = settings.base_gain * base.samples + settings.donor_gain * donor_track
    mixed = AudioBuffer(mix, sr)
    peak_before = mixed.peak
    out = peak_normalize(mixed, settings.normalize_peak_dbfs)
    normalized = out is not mixed
    applied_gain = (10.0 ** (settings.normalize_peak_dbfs / 20.0)) / peak_before \
        if normalized else 1.0
    return RenderResult(audio=out, peak_before=peak_before,
                        applied_gain=applied_gain, normalized=normalized)
