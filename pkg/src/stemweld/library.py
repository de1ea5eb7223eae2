"""Parsing, validation and indexing of track analyses, embeddings and
compatibility scores, plus the key/mode/duration library filter.

File formats:
  analysis/<id>.json   one JSON object per track (bpm, beats, downbeats, key,
                       duration, segments)
  embeddings/<m>.emb   JSON: {"model", "dim", "entries": [{song_id, stem, vector}]}
  scores/cocola.csv    CSV with header vocal_song_id,accomp_song_id,score
  stems/<id>/{vocals,accompaniment}.wav
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .audio import ROLES

TONIC_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
MODES = ("major", "minor")

DOWNBEAT_TOLERANCE = 0.030  # seconds; downbeats must coincide with a beat within this


class LibraryError(ValueError):
    """Malformed or invalid library artifact."""


class ParseError(LibraryError):
    pass


class ValidationError(LibraryError):
    pass


def tonic_distance(a: int, b: int) -> int:
    """Circular pitch-class distance, in [0, 6]."""
    d = abs(a - b) % 12
    return min(d, 12 - d)


@dataclass(frozen=True)
class Key:
    tonic: int  # pitch class, 0 = C
    mode: str

    def __post_init__(self):
        if not 0 <= self.tonic <= 11:
            raise ValidationError(f"tonic {self.tonic} outside [0, 11]")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def tonic_name(self) -> str:
        return TONIC_NAMES[self.tonic]

    def __str__(self) -> str:
        return f"{self.tonic_name} {self.mode}"


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    label: str

    def __post_init__(self):
        if self.start < 0:
            raise ValidationError(f"segment start {self.start} negative")
        if self.end <= self.start:
            raise ValidationError(
                f"segment end before start: [{self.start}, {self.end}]"
            )
        if not self.label:
            raise ValidationError("segment label empty")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class TrackAnalysis:
    song_id: str
    bpm: float
    beats: tuple
    downbeats: tuple
    key: Key
    duration: float
    segments: tuple

    def __post_init__(self):
        if not self.song_id:
            raise ValidationError("song_id empty")
        if self.bpm <= 0:
            raise ValidationError(f"{self.song_id}: bpm {self.bpm} not positive")
        if self.duration <= 0:
            raise ValidationError(f"{self.song_id}: duration {self.duration} not positive")
        beats = tuple(float(b) for b in self.beats)
        downbeats = tuple(float(d) for d in self.downbeats)
        for a, b in zip(beats, beats[1:]):
            if b <= a:
                raise ValidationError(f"{self.song_id}: beats not increasing at {a} -> {b}")
        for d in downbeats:
            if not any(abs(d - b) <= DOWNBEAT_TOLERANCE for b in beats):
                raise ValidationError(
                    f"{self.song_id}: downbeat {d} not within "
                    f"{DOWNBEAT_TOLERANCE * 1000:.0f} ms of any beat"
                )
        for a, b in zip(downbeats, downbeats[1:]):
            if b <= a:
                raise ValidationError(f"{self.song_id}: downbeats not increasing at {a} -> {b}")
        segments = tuple(self.segments)
        for s in segments:
            if s.end > self.duration + 1e-9:
                raise ValidationError(
                    f"{self.song_id}: segment [{s.start}, {s.end}] exceeds "
                    f"duration {self.duration}"
                )
        for a, b in zip(segments, segments[1:]):
            if b.start < a.end - 1e-9:
                raise ValidationError(
                    f"{self.song_id}: segments overlap or unsorted at "
                    f"[{a.start}, {a.end}] -> [{b.start}, {b.end}]"
                )
        object.__setattr__(self, "beats", beats)
        object.__setattr__(self, "downbeats", downbeats)
        object.__setattr__(self, "segments", segments)

    def to_dict(self) -> dict:
        return {
            "id": self.song_id,
            "bpm": self.bpm,
            "beats": list(self.beats),
            "downbeats": list(self.downbeats),
            "duration": self.duration,
            "key": {"tonic": self.key.tonic_name, "mode": self.key.mode},
            "segments": [
                {"start": s.start, "end": s.end, "label": s.label}
                for s in self.segments
            ],
        }


@dataclass(frozen=True)
class StemEmbedding:
    song_id: str
    role: str
    model_id: str
    vector: tuple

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"stem role must be one of {ROLES}, got {self.role!r}")
        vec = tuple(float(v) for v in self.vector)
        if not vec or all(v == 0.0 for v in vec):
            raise ValidationError(
                f"{self.song_id}/{self.role}: embedding vector has zero norm"
            )
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class CocolaScoreSet:
    """Directed compatibility scores keyed by (vocal_song_id, accomp_song_id)."""

    entries: dict
    self_pairs: tuple = ()

    def score(self, vocal_id: str, accomp_id: str) -> float:
        return self.entries[(vocal_id, accomp_id)]

    def song_ids(self) -> list:
        ids = set()
        for v, a in self.entries:
            ids.add(v)
            ids.add(a)
        return sorted(ids)


@dataclass(frozen=True)
class FilterRules:
    """Key/mode/duration admission rules for library subsetting."""

    allowed_tonics: frozenset
    allowed_modes: frozenset
    min_duration: float
    max_duration: float

    def admits(self, track: TrackAnalysis) -> bool:
        return (
            track.key.tonic in self.allowed_tonics
            and track.key.mode in self.allowed_modes
            and self.min_duration <= track.duration <= self.max_duration
        )


def default_filter_rules() -> FilterRules:
    """Narrow pop subset: major keys within two semitones of C, 184-194 s."""
    return FilterRules(
        allowed_tonics=frozenset(t for t in range(12) if tonic_distance(t, 0) <= 2),
        allowed_modes=frozenset({"major"}),
        min_duration=184.0,
        max_duration=194.0,
    )


def filter_library(tracks, rules: FilterRules) -> list:
    """Tracks satisfying all rules, original order preserved."""
    return [t for t in tracks if rules.admits(t)]


def _require(obj: dict, key: str, path) -> object:
    if key not in obj:
        raise ParseError(f"{path}: missing field {key!r}")
    return obj[key]


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_analysis(path) -> TrackAnalysis:
    """Parse and validate one per-track analysis file."""
    doc = _load_json(path)
    key_doc = _require(doc, "key", path)
    tonic_name = _require(key_doc, "tonic", path)
    if tonic_name not in TONIC_NAMES:
        raise ParseError(f"{path}: unknown tonic {tonic_name!r}")
    key = Key(tonic=TONIC_NAMES.index(tonic_name), mode=_require(key_doc, "mode", path))
    segments = tuple(
        Segment(start=float(_require(s, "start", path)),
                end=float(_require(s, "end", path)),
                label=str(_require(s, "label", path)))
        for s in _require(doc, "segments", path)
    )
    return TrackAnalysis(
        song_id=str(_require(doc, "id", path)),
        bpm=float(_require(doc, "bpm", path)),
        beats=tuple(float(b) for b in _require(doc, "beats", path)),
        downbeats=tuple(float(d) for d in _require(doc, "downbeats", path)),
        key=key,
        duration=float(_require(doc, "duration", path)),
        segments=segments,
    )


def save_analysis(track: TrackAnalysis, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(track.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_embeddings(path) -> list:
    """Parse one embedding file; returns StemEmbedding entries for its model."""
    doc = _load_json(path)
    model_id = str(_require(doc, "model", path))
    dim = int(_require(doc, "dim", path))
    seen = set()
    out = []
    for entry in _require(doc, "entries", path):
        song_id = str(_require(entry, "song_id", path))
        role = str(_require(entry, "stem", path))
        vector = _require(entry, "vector", path)
        if len(vector) != dim:
            raise ValidationError(
                f"{path}: {song_id}/{role} has dim {len(vector)}, expected {dim}"
            )
        ident = (song_id, role)
        if ident in seen:
            raise ValidationError(f"{path}: duplicate entry for {song_id}/{role}")
        seen.add(ident)
        out.append(StemEmbedding(song_id=song_id, role=role, model_id=model_id,
                                 vector=tuple(float(v) for v in vector)))
    return out


def load_cocola_scores(path, known_ids=None) -> CocolaScoreSet:
    """Parse the directed score CSV; (A,B) and (B,A) are independent entries."""
    entries = {}
    self_pairs = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:3]] != [
                "vocal_song_id", "accomp_song_id", "score"
            ]:
                raise ParseError(f"{path}: bad header {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 3:
                    raise ParseError(f"{path}:{lineno}: expected 3 columns")
                vocal, accomp = row[0].strip(), row[1].strip()
                try:
                    score = float(row[2])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad score {row[2]!r}") from exc
                pair = (vocal, accomp)
                if pair in entries:
                    raise ValidationError(f"{path}:{lineno}: duplicate pair {pair}")
                if known_ids is not None:
                    for sid in pair:
                        if sid not in known_ids:
                            raise ValidationError(
                                f"{path}:{lineno}: unknown song_id {sid!r}"
                            )
                if vocal == accomp:
                    self_pairs.append(vocal)
                entries[pair] = score
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return CocolaScoreSet(entries=entries, self_pairs=tuple(self_pairs))


@dataclass
class Diagnostic:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class Library:
    """Indexed library root: analyses, stem paths, embeddings, scores.

    Layout convention: analysis/<id>.json, stems/<id>/{vocals,accompaniment}.wav,
    embeddings/<model>.emb, scores/cocola.csv.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.tracks: dict = {}
        self.embeddings: dict = {}  # model_id -> list[StemEmbedding]
        self.scores: CocolaScoreSet | None = None

    @classmethod
    def load(cls, root) -> "Library":
        lib = cls(root)
        diags = lib.scan()
        if diags:
            raise LibraryError("; ".join(str(d) for d in diags))
        return lib

    def scan(self) -> list:
        """Load everything reachable, collecting diagnostics instead of failing fast."""
        diags = []
        analysis_dir = self.root / "analysis"
        if analysis_dir.is_dir():
            for path in sorted(analysis_dir.glob("*.json")):
                try:
                    track = load_analysis(path)
                    self.tracks[track.song_id] = track
                except LibraryError as exc:
                    diags.append(Diagnostic(str(path), str(exc)))
        emb_dir = self.root / "embeddings"
        if emb_dir.is_dir():
            for path in sorted(emb_dir.glob("*.emb")):
                try:
                    entries = load_embeddings(path)
                    if not entries:
                        continue
                    model_id = entries[0].model_id
                    if model_id in self.embeddings:
                        diags.append(Diagnostic(
                            str(path), f"duplicate embedding model {model_id!r}"))
                        continue
                    self.embeddings[model_id] = entries
                except LibraryError as exc:
                    diags.append(Diagnostic(str(path), str(exc)))
        score_path = self.root / "scores" / "cocola.csv"
        if score_path.is_file():
            try:
                self.scores = load_cocola_scores(score_path)
            except LibraryError as exc:
                diags.append(Diagnostic(str(score_path), str(exc)))
        return diags

    def validate(self) -> list:
        """Full-library diagnostics: per-file violations plus missing stems."""
        diags = self.scan()
        for song_id in sorted(self.tracks):
            for role in ROLES:
                path = self.stem_path(song_id, role)
                if not path.is_file():
                    diags.append(Diagnostic(str(path), "stem file missing"))
        return diags

    def stem_path(self, song_id: str, role: str) -> Path:
        return self.root / "stems" / song_id / f"{role}.wav"

    def track(self, song_id: str) -> TrackAnalysis:
        if song_id not in self.tracks:
            raise LibraryError(f"unknown song {song_id!r}")
        return self.tracks[song_id]

    def song_ids(self) -> list:
        return sorted(self.tracks)
