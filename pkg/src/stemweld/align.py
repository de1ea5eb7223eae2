"""Mashup planning: key shift, segment pairing, repetition fill, warp maps.

A plan is fully resolved before any audio is touched: for every base segment
it records the donor segment it pairs with (if any), the donor->base warp map
built from the two beat grids, and the placement schedule that tiles the base
segment with repetitions of the warped donor material.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

from .audio import ROLES
from .library import Key, Segment, TrackAnalysis
from .tsm import WarpMap, build_warp_map

DONOR_REPEAT = "donor_repeat"
BASE_ONLY = "base_only"
GAP_LABEL = "(unlabeled)"

_GRID_TOL = 1e-6


class PlanError(ValueError):
    """Plan construction failed."""


class ModeMismatchWarning(UserWarning):
    """Base and donor keys disagree in mode; only the tonic is aligned."""


@dataclass(frozen=True)
class RoleAssignment:
    base_song_id: str
    donor_song_id: str
    donor_role: str
    allow_self: bool = False

    def __post_init__(self):
        if self.donor_role not in ROLES:
            raise PlanError(f"donor_role must be one of {ROLES}")
        if self.base_song_id == self.donor_song_id and not self.allow_self:
            raise PlanError(
                f"base and donor are both {self.base_song_id!r}; "
                "self-mashup requires allow_self"
            )

    @property
    def base_role(self) -> str:
        return ROLES[1] if self.donor_role == ROLES[0] else ROLES[0]


@dataclass(frozen=True)
class SegmentPairing:
    base_segment: Segment
    donor_segment: Segment | None
    fill: str

    def __post_init__(self):
        if self.fill not in (DONOR_REPEAT, BASE_ONLY):
            raise PlanError(f"bad fill mode {self.fill!r}")
        if (self.fill == BASE_ONLY) != (self.donor_segment is None):
            raise PlanError("fill=base_only exactly when donor_segment is absent")


@dataclass(frozen=True)
class Placement:
    """One copy of warped donor material on the base timeline (all seconds)."""

    donor_offset: float  # into the warped segment
    base_offset: float   # absolute base time
    length: float


@dataclass(frozen=True)
class MashupPlan:
    roles: RoleAssignment
    semitone_shift: float
    pairings: tuple           # SegmentPairing per base segment, timeline order
    warp_maps: tuple          # WarpMap | None, parallel to pairings
    schedules: tuple          # tuple[Placement, ...] per pairing
    output_duration: float
    overrides: tuple = ()     # (name, value) pairs recorded from the caller
    notes: tuple = ()

    def __post_init__(self):
        if not (len(self.pairings) == len(self.warp_maps) == len(self.schedules)):
            raise PlanError("pairings, warp_maps and schedules must be parallel")
        for pairing, wm in zip(self.pairings, self.warp_maps):
            if (pairing.fill == DONOR_REPEAT) != (wm is not None):
                raise PlanError("warp map required exactly for donor-filled pairings")
        cursor = 0.0
        for pairing in self.pairings:
            seg = pairing.base_segment
            if abs(seg.start - cursor) > _GRID_TOL:
                raise PlanError(
                    f"pairings must tile the base timeline: gap/overlap at "
                    f"{cursor:.6f} -> {seg.start:.6f}"
                )
            cursor = seg.end
        if self.pairings and abs(cursor - self.output_duration) > _GRID_TOL:
            raise PlanError(
                f"pairings end at {cursor:.6f} but output_duration is "
                f"{self.output_duration:.6f}"
            )


def key_shift_semitones(base_key: Key, donor_key: Key) -> float:
    """Signed semitone shift in [-6, +5] moving the donor tonic onto the base tonic.

    The tritone tie resolves downward (-6). Mode mismatch leaves the tonic
    arithmetic unchanged and emits ModeMismatchWarning.
    """
    shift = ((base_key.tonic - donor_key.tonic + 6) % 12) - 6
    if base_key.mode != donor_key.mode:
        warnings.warn(
            f"mode mismatch: base {base_key} vs donor {donor_key}; aligning tonic only",
            ModeMismatchWarning,
            stacklevel=2,
        )
    return float(shift)


def pair_segments(base: TrackAnalysis, donor: TrackAnalysis) -> list:
    """One pairing per base segment: same-label donor segment at the same
    per-label ordinal if present, else the donor's first with that label,
    else base_only."""
    donor_by_label: dict = {}
    for seg in donor.segments:
        donor_by_label.setdefault(seg.label, []).append(seg)

    ordinal: dict = {}
    out = []
    for seg in base.segments:
        occ = ordinal.get(seg.label, 0)
        ordinal[seg.label] = occ + 1
        candidates = donor_by_label.get(seg.label, [])
        if occ < len(candidates):
            donor_seg = candidates[occ]
        elif candidates:
            donor_seg = candidates[0]
        else:
            donor_seg = None
        out.append(SegmentPairing(
            base_segment=seg,
            donor_segment=donor_seg,
            fill=DONOR_REPEAT if donor_seg is not None else BASE_ONLY,
        ))
    return out


def schedule_fill(pairing: SegmentPairing, donor_warped_duration: float) -> list:
    """Loop the warped donor segment from its start until the base span is
    exactly covered; the final repetition is truncated."""
    if pairing.fill != DONOR_REPEAT:
        raise PlanError("schedule_fill needs a donor-filled pairing")
    if donor_warped_duration <= 0:
        raise PlanError("zero-length warped donor segment")
    span = pairing.base_segment
    placements = []
    covered = 0.0
    remaining = span.duration
    while remaining > _GRID_TOL:
        length = min(donor_warped_duration, remaining)
        placements.append(Placement(
            donor_offset=0.0,
            base_offset=span.start + covered,
            length=length,
        ))
        covered += length
        remaining -= length
    return placements


def _tile_timeline(pairings, duration: float) -> list:
    """Insert base-only fillers over any spans the analysis left unlabeled,
    so the plan covers the base timeline end to end."""
    tiled = []
    cursor = 0.0
    for p in pairings:
        if p.base_segment.start > cursor + _GRID_TOL:
            tiled.append(SegmentPairing(
                base_segment=Segment(cursor, p.base_segment.start, GAP_LABEL),
                donor_segment=None, fill=BASE_ONLY,
            ))
        tiled.append(p)
        cursor = p.base_segment.end
    if duration > cursor + _GRID_TOL:
        tiled.append(SegmentPairing(
            base_segment=Segment(cursor, duration, GAP_LABEL),
            donor_segment=None, fill=BASE_ONLY,
        ))
    return tiled


def _grid_points(track: TrackAnalysis, seg: Segment) -> list:
    """Segment boundaries plus interior downbeats: the bar-interval endpoints
    the warp is anchored on."""
    pts = [seg.start]
    pts += [d for d in track.downbeats if seg.start + _GRID_TOL < d < seg.end - _GRID_TOL]
    pts.append(seg.end)
    return pts


def _pairing_warp_map(base: TrackAnalysis, donor: TrackAnalysis,
                      pairing: SegmentPairing) -> WarpMap:
    bpts = _grid_points(base, pairing.base_segment)
    dpts = _grid_points(donor, pairing.donor_segment)
    # Pair the first m bar intervals; a donor shorter than the base span is
    # covered by the repeat schedule, a longer one is simply not consumed.
    m = min(len(bpts), len(dpts)) - 1
    if m < 1:
        raise PlanError(
            f"segment pair {pairing.base_segment.label!r} has no usable grid"
        )
    return build_warp_map(
        donor_beats=donor.beats,
        donor_downbeats=dpts[:m + 1],
        base_beats=base.beats,
        base_downbeats=bpts[:m + 1],
        region=(bpts[0], bpts[m]),
    )


def build_plan(base: TrackAnalysis, donor: TrackAnalysis,
               roles: RoleAssignment) -> MashupPlan:
    """Resolve a full mashup plan; deterministic for identical inputs."""
    if roles.base_song_id != base.song_id or roles.donor_song_id != donor.song_id:
        raise PlanError(
            f"role assignment ({roles.base_song_id}, {roles.donor_song_id}) does not "
            f"match analyses ({base.song_id}, {donor.song_id})"
        )
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ModeMismatchWarning)
        shift = key_shift_semitones(base.key, donor.key)
    for w in caught:
        notes.append(str(w.message))
        warnings.warn(w.message, ModeMismatchWarning, stacklevel=2)

    pairings = tuple(_tile_timeline(pair_segments(base, donor), base.duration))
    warp_maps = []
    schedules = []
    for pairing in pairings:
        if pairing.fill == DONOR_REPEAT:
            wm = _pairing_warp_map(base, donor, pairing)
            warp_maps.append(wm)
            schedules.append(tuple(schedule_fill(pairing, wm.target_duration)))
        else:
            warp_maps.append(None)
            schedules.append(())
    return MashupPlan(
        roles=roles,
        semitone_shift=shift,
        pairings=pairings,
        warp_maps=tuple(warp_maps),
        schedules=tuple(schedules),
        output_duration=base.duration,
        notes=tuple(notes),
    )


def apply_overrides(plan: MashupPlan, semitones: float | None = None,
                    tempo_ratio: float | None = None) -> MashupPlan:
    """Return a plan with caller overrides applied and recorded.

    semitones replaces the key shift; tempo_ratio replaces every grid-derived
    warp map with a uniform stretch of that ratio (rebuilding the schedules,
    since the warped durations change).
    """
    overrides = list(plan.overrides)
    if semitones is not None:
        plan = replace(plan, semitone_shift=float(semitones))
        overrides.append(("semitones", float(semitones)))
    if tempo_ratio is not None:
        if tempo_ratio <= 0:
            raise PlanError(f"tempo_ratio must be positive, got {tempo_ratio}")
        warp_maps = []
        schedules = []
        for pairing in plan.pairings:
            if pairing.fill == DONOR_REPEAT:
                d = pairing.donor_segment
                b = pairing.base_segment
                wm = WarpMap.linear(d.start, d.end, b.start,
                                    b.start + d.duration * tempo_ratio)
                warp_maps.append(wm)
                schedules.append(tuple(schedule_fill(pairing, wm.target_duration)))
            else:
                warp_maps.append(None)
                schedules.append(())
        plan = replace(plan, warp_maps=tuple(warp_maps), schedules=tuple(schedules))
        overrides.append(("tempo_ratio", float(tempo_ratio)))
    return replace(plan, overrides=tuple(overrides))


def plan_to_dict(plan: MashupPlan) -> dict:
    def seg(s: Segment | None):
        if s is None:
            return None
        return {"start": s.start, "end": s.end, "label": s.label}

    return {
        "base_song_id": plan.roles.base_song_id,
        "donor_song_id": plan.roles.donor_song_id,
        "donor_role": plan.roles.donor_role,
        "allow_self": plan.roles.allow_self,
        "semitone_shift": plan.semitone_shift,
        "output_duration": plan.output_duration,
        "overrides": [list(o) for o in plan.overrides],
        "notes": list(plan.notes),
        "pairings": [
            {
                "base_segment": seg(p.base_segment),
                "donor_segment": seg(p.donor_segment),
                "fill": p.fill,
                "warp_map": (
                    {"anchors": [list(a) for a in wm.anchors]} if wm else None
                ),
                "placements": [
                    {"donor_offset": pl.donor_offset, "base_offset": pl.base_offset,
                     "length": pl.length}
                    for pl in sched
                ],
            }
            for p, wm, sched in zip(plan.pairings, plan.warp_maps, plan.schedules)
        ],
    }


def plan_from_dict(doc: dict) -> MashupPlan:
    def seg(d):
        if d is None:
            return None
        return Segment(start=d["start"], end=d["end"], label=d["label"])

    pairings = []
    warp_maps = []
    schedules = []
    for p in doc["pairings"]:
        pairings.append(SegmentPairing(
            base_segment=seg(p["base_segment"]),
            donor_segment=seg(p["donor_segment"]),
            fill=p["fill"],
        ))
        wm = p.get("warp_map")
        warp_maps.append(WarpMap(tuple(tuple(a) for a in wm["anchors"])) if wm else None)
        schedules.append(tuple(
            Placement(donor_offset=pl["donor_offset"], base_offset=pl["base_offset"],
                      length=pl["length"])
            for pl in p.get("placements", ())
        ))
    return MashupPlan(
        roles=RoleAssignment(
            base_song_id=doc["base_song_id"],
            donor_song_id=doc["donor_song_id"],
            donor_role=doc["donor_role"],
            allow_self=doc.get("allow_self", False),
        ),
        semitone_shift=doc["semitone_shift"],
        pairings=tuple(pairings),
        warp_maps=tuple(warp_maps),
        schedules=tuple(schedules),
        output_duration=doc["output_duration"],
        overrides=tuple(tuple(o) for o in doc.get("overrides", ())),
        notes=tuple(doc.get("notes", ())),
    )


def plan_to_json(plan: MashupPlan) -> str:
    """Deterministic serialization: identical plans give identical bytes."""
    return json.dumps(plan_to_dict(plan), indent=2, sort_keys=True) + "\n"


def plan_from_json(text: str) -> MashupPlan:
    return plan_from_dict(json.loads(text))
