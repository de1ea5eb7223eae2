import pytest

from stemweld.align import (BASE_ONLY, DONOR_REPEAT, ModeMismatchWarning, PlanError,
                            RoleAssignment, SegmentPairing, apply_overrides,
                            build_plan, key_shift_semitones, pair_segments,
                            plan_from_json, plan_to_json, schedule_fill)
from stemweld.library import Key, Segment, TrackAnalysis
from conftest import grid_track


class TestKeyShift:
    def test_identity(self):
        assert key_shift_semitones(Key(0, "major"), Key(0, "major")) == 0

    def test_c_from_d(self):
        assert key_shift_semitones(Key(0, "major"), Key(2, "major")) == -2

    def test_tritone_resolves_down(self):
        assert key_shift_semitones(Key(0, "major"), Key(6, "major")) == -6

    def test_all_pairs_in_range_and_correct(self):
        for base in range(12):
            for donor in range(12):
                s = key_shift_semitones(Key(base, "major"), Key(donor, "major"))
                assert -6 <= s <= 5
                assert (donor + s) % 12 == base

    def test_mode_mismatch_warns(self):
        with pytest.warns(ModeMismatchWarning):
            s = key_shift_semitones(Key(0, "major"), Key(0, "minor"))
        assert s == 0


class TestRoleAssignment:
    def test_self_requires_override(self):
        with pytest.raises(PlanError):
            RoleAssignment("a", "a", "vocals")
        ra = RoleAssignment("a", "a", "vocals", allow_self=True)
        assert ra.base_role == "accompaniment"

    def test_base_role_complement(self):
        assert RoleAssignment("a", "b", "accompaniment").base_role == "vocals"


class TestPairSegments:
    def test_matching_structures(self):
        base = grid_track("b", 120, [(0, 8, "verse"), (8, 16, "chorus")])
        donor = grid_track("d", 120, [(0, 8, "verse"), (8, 16, "chorus")])
        pairings = pair_segments(base, donor)
        assert [p.fill for p in pairings] == [DONOR_REPEAT, DONOR_REPEAT]
        assert pairings[0].donor_segment.label == "verse"
        assert pairings[1].donor_segment.label == "chorus"

    def test_missing_label_is_base_only(self):
        base = grid_track("b", 120, [(0, 8, "verse"), (8, 16, "bridge")])
        donor = grid_track("d", 120, [(0, 8, "verse")])
        pairings = pair_segments(base, donor)
        assert pairings[1].fill == BASE_ONLY
        assert pairings[1].donor_segment is None

    def test_ordinal_fallback_to_first(self):
        base = grid_track("b", 120, [(0, 8, "verse"), (8, 16, "verse")])
        donor = grid_track("d", 120, [(0, 8, "verse")])
        pairings = pair_segments(base, donor)
        assert pairings[1].donor_segment == donor.segments[0]

    def test_count_and_offsets_match_base(self):
        base = grid_track("b", 120, [(0, 4, "a"), (4, 10, "b"), (10, 16, "a")])
        donor = grid_track("d", 100, [(0, 6, "b")])
        pairings = pair_segments(base, donor)
        assert len(pairings) == len(base.segments)
        assert [p.base_segment for p in pairings] == list(base.segments)


class TestScheduleFill:
    def _pairing(self, span):
        return SegmentPairing(
            base_segment=Segment(10.0, 10.0 + span, "verse"),
            donor_segment=Segment(0.0, 8.0, "verse"),
            fill=DONOR_REPEAT,
        )

    def test_loop_with_truncation(self):
        placements = schedule_fill(self._pairing(20.0), 8.0)
        assert [p.length for p in placements] == [8.0, 8.0, 4.0]
        assert [p.base_offset for p in placements] == [10.0, 18.0, 26.0]
        assert all(p.donor_offset == 0.0 for p in placements)

    def test_exact_fit(self):
        placements = schedule_fill(self._pairing(8.0), 8.0)
        assert [p.length for p in placements] == [8.0]

    def test_single_truncated(self):
        placements = schedule_fill(self._pairing(7.0), 8.0)
        assert [p.length for p in placements] == [7.0]

    def test_sum_is_exact_and_contiguous(self, rng):
        for _ in range(50):
            span = float(rng.uniform(0.5, 40))
            warped = float(rng.uniform(0.5, 12))
            placements = schedule_fill(self._pairing(span), warped)
            assert sum(p.length for p in placements) == pytest.approx(span, abs=1e-9)
            for a, b in zip(placements, placements[1:]):
                assert b.base_offset == pytest.approx(a.base_offset + a.length,
                                                      abs=1e-9)

    def test_zero_length_donor(self):
        with pytest.raises(PlanError):
            schedule_fill(self._pairing(8.0), 0.0)


class TestBuildPlan:
    def test_self_mashup_identity(self):
        track = grid_track("x", 120, [(0, 8, "verse"), (8, 16, "chorus")])
        plan = build_plan(track, track, RoleAssignment("x", "x", "vocals",
                                                       allow_self=True))
        assert plan.semitone_shift == 0
        assert all(wm.is_identity() for wm in plan.warp_maps if wm)
        assert plan.output_duration == track.duration

    def test_tempo_and_key_composition(self):
        base = grid_track("b", 120, [(0, 16, "verse")], key=Key(0, "major"))
        donor = grid_track("d", 100, [(0, 19.2, "verse")], key=Key(2, "major"))
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        assert plan.semitone_shift == -2
        wm = plan.warp_maps[0]
        rates = [(t1 - t0) / (s1 - s0)
                 for (s0, t0), (s1, t1) in zip(wm.anchors, wm.anchors[1:])]
        assert all(r == pytest.approx(0.5 / 0.6, abs=1e-9) for r in rates)

    def test_no_common_labels_degenerates(self):
        base = grid_track("b", 120, [(0, 8, "verse")])
        donor = grid_track("d", 120, [(0, 8, "drop")])
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        assert all(p.fill == BASE_ONLY for p in plan.pairings)
        assert plan.warp_maps == (None,)

    def test_pairings_tile_base_timeline(self):
        base = grid_track("b", 120, [(0, 8, "a"), (8, 20, "b"), (20, 32, "a")])
        donor = grid_track("d", 96, [(0, 10, "a"), (10, 20, "b")])
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        edges = [(p.base_segment.start, p.base_segment.end) for p in plan.pairings]
        assert edges[0][0] == 0.0
        assert edges[-1][1] == base.duration
        for (_, e0), (s1, _) in zip(edges, edges[1:]):
            assert e0 == s1

    def test_gapped_analysis_gets_base_only_fillers(self):
        # labels leave [4, 8) and the tail uncovered
        base = grid_track("b", 120, [(0, 4, "a"), (8, 12, "b")])
        base = TrackAnalysis(
            song_id=base.song_id, bpm=base.bpm, beats=base.beats,
            downbeats=base.downbeats, key=base.key, duration=16.0,
            segments=base.segments,
        )
        donor = grid_track("d", 120, [(0, 4, "a"), (4, 8, "b")])
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        fills = [(p.base_segment.start, p.base_segment.end, p.fill)
                 for p in plan.pairings]
        assert fills == [
            (0.0, 4.0, DONOR_REPEAT),
            (4.0, 8.0, BASE_ONLY),
            (8.0, 12.0, DONOR_REPEAT),
            (12.0, 16.0, BASE_ONLY),
        ]

    def test_deterministic(self):
        base = grid_track("b", 120, [(0, 8, "a"), (8, 20, "b")])
        donor = grid_track("d", 96, [(0, 10, "a"), (10, 20, "b")])
        p1 = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        p2 = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        assert plan_to_json(p1) == plan_to_json(p2)

    def test_shorter_donor_fills_by_repetition(self):
        base = grid_track("b", 120, [(0, 20, "verse")])
        donor = grid_track("d", 120, [(0, 8, "verse")])
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        assert [p.length for p in plan.schedules[0]] == [8.0, 8.0, 4.0]
        assert plan.warp_maps[0].target_duration == 8.0


class TestOverridesAndSerialization:
    def test_semitone_override_recorded(self):
        base = grid_track("b", 120, [(0, 8, "a")], key=Key(0, "major"))
        donor = grid_track("d", 120, [(0, 8, "a")], key=Key(2, "major"))
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        assert plan.semitone_shift == -2
        forced = apply_overrides(plan, semitones=0)
        assert forced.semitone_shift == 0
        assert ("semitones", 0.0) in forced.overrides

    def test_tempo_override_rebuilds_maps(self):
        base = grid_track("b", 120, [(0, 16, "a")])
        donor = grid_track("d", 100, [(0, 19.2, "a")])
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        forced = apply_overrides(plan, tempo_ratio=1.0)
        wm = forced.warp_maps[0]
        assert len(wm.anchors) == 2
        assert wm.target_duration == pytest.approx(19.2)
        assert ("tempo_ratio", 1.0) in forced.overrides

    def test_json_roundtrip(self):
        base = grid_track("b", 120, [(0, 8, "a"), (8, 20, "b")])
        donor = grid_track("d", 96, [(0, 10, "a")])
        plan = build_plan(base, donor, RoleAssignment("b", "d", "vocals"))
        text = plan_to_json(plan)
        back = plan_from_json(text)
        assert plan_to_json(back) == text
        assert back.roles == plan.roles
        assert back.warp_maps == plan.warp_maps
        assert back.schedules == plan.schedules
