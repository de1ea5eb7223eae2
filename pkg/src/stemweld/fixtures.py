"""Synthetic fixture generation: click tracks, metronome-grid analyses and
small demo libraries. Useful for tests and for trying the engine without any
real music on disk."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio import ACCOMPANIMENT, VOCALS, AudioBuffer, write_wav
from .library import Key, Segment, TONIC_NAMES, TrackAnalysis

CLICK_MS = 4.0
CLICK_FREQ = 1500.0


def click(sr: int, amp: float = 0.9, freq: float = CLICK_FREQ) -> np.ndarray:
    """Short decaying tone burst with an instant attack."""
    n = int(sr * CLICK_MS / 1000.0)
    t = np.arange(n) / sr
    return amp * np.cos(2.0 * np.pi * freq * t) * np.exp(-t / 0.0015)


def click_track(bpm: float, bars: int, sr: int, beats_per_bar: int = 4,
                amp: float = 0.9, accent: float = 1.0) -> tuple:
    """(AudioBuffer, beats, downbeats) for a steady metronome.

    Downbeat clicks are scaled by `accent`. Duration is exactly bars *
    beats_per_bar beat periods.
    """
    period = 60.0 / bpm
    n_beats = bars * beats_per_bar
    duration = n_beats * period
    n = int(round(duration * sr))
    x = np.zeros(n)
    beats = []
    downbeats = []
    for k in range(n_beats):
        t = k * period
        beats.append(t)
        gain = 1.0
        if k % beats_per_bar == 0:
            downbeats.append(t)
            gain = accent
        i = int(round(t * sr))
        burst = click(sr, amp * gain)
        j = min(i + len(burst), n)
        x[i:j] += burst[:j - i]
    return AudioBuffer.mono(x, sr), beats, downbeats


def grid_analysis(song_id: str, bpm: float, bars: int, key: Key,
                  segment_labels=None, beats_per_bar: int = 4) -> TrackAnalysis:
    """Uniform-grid analysis; segments split the bars evenly across labels
    (defaults to one segment spanning the track)."""
    period = 60.0 / bpm
    n_beats = bars * beats_per_bar
    duration = n_beats * period
    beats = tuple(k * period for k in range(n_beats))
    downbeats = tuple(k * period for k in range(0, n_beats, beats_per_bar))
    if segment_labels is None:
        segment_labels = ["full"]
    bars_per_seg = bars // len(segment_labels)
    segments = []
    for i, label in enumerate(segment_labels):
        start_bar = i * bars_per_seg
        end_bar = (i + 1) * bars_per_seg if i < len(segment_labels) - 1 else bars
        segments.append(Segment(
            start=start_bar * beats_per_bar * period,
            end=end_bar * beats_per_bar * period,
            label=label,
        ))
    return TrackAnalysis(
        song_id=song_id, bpm=bpm, beats=beats, downbeats=downbeats,
        key=key, duration=duration, segments=tuple(segments),
    )


def write_track(root, track: TrackAnalysis, audio: AudioBuffer,
                donor_audio: AudioBuffer | None = None) -> None:
    """Write analysis + stem WAVs under the library layout. The same audio is
    used for both stems unless donor_audio is given for vocals."""
    root = Path(root)
    (root / "analysis").mkdir(parents=True, exist_ok=True)
    stem_dir = root / "stems" / track.song_id
    stem_dir.mkdir(parents=True, exist_ok=True)
    with open(root / "analysis" / f"{track.song_id}.json", "w", encoding="utf-8") as fh:
        json.dump(track.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_wav(donor_audio or audio, stem_dir / f"{VOCALS}.wav", "float32")
    write_wav(audio, stem_dir / f"{ACCOMPANIMENT}.wav", "float32")


def write_embedding_file(root, model_id: str, vectors: dict) -> Path:
    """vectors: {(song_id, role): sequence}; all must share one dimension."""
    root = Path(root)
    (root / "embeddings").mkdir(parents=True, exist_ok=True)
    dims = {len(v) for v in vectors.values()}
    if len(dims) != 1:
        raise ValueError(f"mixed dimensions {sorted(dims)}")
    path = root / "embeddings" / f"{model_id}.emb"
    doc = {
        "model": model_id,
        "dim": dims.pop(),
        "entries": [
            {"song_id": sid, "stem": role, "vector": [float(x) for x in vec]}
            for (sid, role), vec in sorted(vectors.items())
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    return path


def write_score_file(root, entries: dict) -> Path:
    """entries: {(vocal_id, accomp_id): score}."""
    root = Path(root)
    (root / "scores").mkdir(parents=True, exist_ok=True)
    path = root / "scores" / "cocola.csv"
    lines = ["vocal_song_id,accomp_song_id,score"]
    for (v, a), s in sorted(entries.items()):
        lines.append(f"{v},{a},{s!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_demo_library(root, n_songs: int = 4, sr: int = 22050, bars: int = 8,
                      seed: int = 0) -> Path:
    """Small self-contained library of click tracks with embeddings and a
    directed score file; asymmetric on purpose."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    bpms = [96 + 8 * i for i in range(n_songs)]
    ids = [f"song{i:02d}" for i in range(n_songs)]
    for i, sid in enumerate(ids):
        key = Key(tonic=(i * 2) % 12, mode="major")
        track = grid_analysis(sid, bpms[i], bars, key,
                              segment_labels=["verse", "chorus"])
        audio, _, _ = click_track(bpms[i], bars, sr)
        write_track(root, track, audio)

    dim = 8
    vectors = {}
    for sid in ids:
        for role in (VOCALS, ACCOMPANIMENT):
            vectors[(sid, role)] = rng.normal(size=dim)
    write_embedding_file(root, "clap", vectors)
    write_embedding_file(
        root, "mert",
        {k: rng.normal(size=dim) for k in vectors},
    )

    scores = {}
    for v in ids:
        for a in ids:
            if v != a:
                scores[(v, a)] = round(float(rng.uniform(0.0, 1.0)), 6)
    write_score_file(root, scores)
    return root


def major_key(tonic_name: str) -> Key:
    return Key(tonic=TONIC_NAMES.index(tonic_name), mode="major")
