"""End-to-end render orchestration shared by the CLI and the HTTP service:
load stems, equalize rates, plan, render, write audio + plan + report."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .align import (MashupPlan, RoleAssignment, apply_overrides, build_plan,
                    plan_to_json)
from .audio import Stem, read_wav, resample, write_wav
from .library import Library
from .render import RenderResult, RenderSettings, render


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenderPaths:
    audio: Path
    plan: Path
    report: Path


def load_stem(library: Library, song_id: str, role: str) -> Stem:
    path = library.stem_path(song_id, role)
    if not path.is_file():
        raise PipelineError(f"missing stem file {path}")
    return Stem(song_id=song_id, role=role, audio=read_wav(path))


def prepare_plan(library: Library, base_id: str, donor_id: str, donor_role: str,
                 allow_self: bool = False, semitones: float | None = None,
                 tempo_ratio: float | None = None) -> MashupPlan:
    base = library.track(base_id)
    donor = library.track(donor_id)
    roles = RoleAssignment(base_song_id=base_id, donor_song_id=donor_id,
                           donor_role=donor_role, allow_self=allow_self)
    plan = build_plan(base, donor, roles)
    if semitones is not None or tempo_ratio is not None:
        plan = apply_overrides(plan, semitones=semitones, tempo_ratio=tempo_ratio)
    return plan


def render_plan(library: Library, plan: MashupPlan,
                settings: RenderSettings) -> RenderResult:
    base_stem = load_stem(library, plan.roles.base_song_id, plan.roles.base_role)
    donor_stem = load_stem(library, plan.roles.donor_song_id, plan.roles.donor_role)
    if donor_stem.audio.sample_rate != base_stem.audio.sample_rate:
        donor_stem = Stem(
            song_id=donor_stem.song_id,
            role=donor_stem.role,
            audio=resample(donor_stem.audio, base_stem.audio.sample_rate),
        )
    return render(plan, base_stem, donor_stem, settings)


def write_outputs(plan: MashupPlan, result: RenderResult, settings: RenderSettings,
                  out_path) -> RenderPaths:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    info = write_wav(result.audio, out_path, settings.output_bit_depth)
    plan_path = out_path.with_suffix(out_path.suffix + ".plan.json")
    plan_path.write_text(plan_to_json(plan), encoding="utf-8")
    report_path = out_path.with_suffix(out_path.suffix + ".report.json")
    report = {
        "plan": json.loads(plan_to_json(plan)),
        "settings": {
            "output_bit_depth": settings.output_bit_depth,
            "donor_gain": settings.donor_gain,
            "base_gain": settings.base_gain,
            "normalize_peak_dbfs": settings.normalize_peak_dbfs,
        },
        "render": result.to_report(),
        "clipping": {"clipped": info.clipped, "n_clipped": info.n_clipped,
                     "peak_written": info.peak},
    }
    report_path.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return RenderPaths(audio=out_path, plan=plan_path, report=report_path)


def render_mashup(library: Library, base_id: str, donor_id: str, out_path,
                  donor_role: str = "vocals", allow_self: bool = False,
                  semitones: float | None = None, tempo_ratio: float | None = None,
                  settings: RenderSettings | None = None) -> RenderPaths:
    if settings is None:
        settings = RenderSettings()
    plan = prepare_plan(library, base_id, donor_id, donor_role,
                        allow_self=allow_self, semitones=semitones,
                        tempo_ratio=tempo_ratio)
    result = render_plan(library, plan, settings)
    return write_outputs(plan, result, settings, out_path)
