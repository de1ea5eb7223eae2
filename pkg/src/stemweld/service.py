"""HTTP facade over the library: browse, rank, render jobs, stream audio.

State: the library is immutable after startup; the job table is the single
synchronized mutable structure. Renders run on a bounded FIFO worker pool and
finished audio is cached on disk keyed by a hash of (plan, settings).
"""
from __future__ import annotations

import argparse
import hashlib
import tempfile
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .align import PlanError, plan_to_json
from .analysis import AnalysisError, agglomerative_cluster, asymmetry_stats, rank_candidates
from .audio import ROLES
from .library import Library
from .pipeline import prepare_plan, render_plan, write_outputs
from .render import RenderSettings

QUEUED = "queued"
RUNNING = "running"
DONE = "done"
FAILED = "failed"

DEFAULT_WORKERS = 2


class MashupOverrides(BaseModel):
    semitones: float | None = None
    tempo_ratio: float | None = None
    donor_gain: float = 1.0
    base_gain: float = 1.0


class MashupRequest(BaseModel):
    base: str
    donor: str
    donor_role: str = "vocals"
    allow_self: bool = False
    overrides: MashupOverrides = MashupOverrides()


class RenderJob:
    def __init__(self, job_id: str):
        self.job_id = job_id
        self.state = QUEUED
        self.error: str | None = None
        self.output_path: Path | None = None
        self.plan_summary: dict | None = None

    def to_dict(self) -> dict:
        doc = {"job_id": self.job_id, "state": self.state}
        if self.error is not None:
            doc["error"] = self.error
        if self.plan_summary is not None:
            doc["plan"] = self.plan_summary
        return doc


class JobManager:
    """FIFO render queue on a bounded worker pool with a disk cache."""

    def __init__(self, library: Library, cache_dir: Path, workers: int = DEFAULT_WORKERS):
        self.library = library
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.executor = ThreadPoolExecutor(max_workers=workers)
        self.jobs: dict = {}
        self.lock = threading.Lock()

    def submit(self, req: MashupRequest) -> RenderJob:
        job = RenderJob(uuid.uuid4().hex)
        with self.lock:
            self.jobs[job.job_id] = job
        self.executor.submit(self._run, job, req)
        return job

    def get(self, job_id: str) -> RenderJob:
        with self.lock:
            if job_id not in self.jobs:
                raise KeyError(job_id)
            return self.jobs[job_id]

    def _run(self, job: RenderJob, req: MashupRequest) -> None:
        with self.lock:
            job.state = RUNNING
        try:
            settings = RenderSettings(
                donor_gain=req.overrides.donor_gain,
                base_gain=req.overrides.base_gain,
            )
            plan = prepare_plan(
                self.library, req.base, req.donor, req.donor_role,
                allow_self=req.allow_self,
                semitones=req.overrides.semitones,
                tempo_ratio=req.overrides.tempo_ratio,
            )
            digest = hashlib.sha256(
                (plan_to_json(plan) + repr(settings)).encode()
            ).hexdigest()[:24]
            out_path = self.cache_dir / f"{digest}.wav"
            if not out_path.is_file():
                result = render_plan(self.library, plan, settings)
                write_outputs(plan, result, settings, out_path)
            summary = {
                "semitone_shift": plan.semitone_shift,
                "overrides": [list(o) for o in plan.overrides],
                "pairings": [
                    {
                        "label": pairing.base_segment.label,
                        "fill": pairing.fill,
                        "n_placements": len(sched),
                    }
                    for pairing, sched in zip(plan.pairings, plan.schedules)
                ],
            }
            with self.lock:
                job.output_path = out_path
                job.plan_summary = summary
                job.state = DONE
        except Exception as exc:  # worker thread: surface everything via the job
            with self.lock:
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = FAILED

    def shutdown(self) -> None:
        self.executor.shutdown(wait=False)


def create_app(library_root=None, cache_dir=None, workers: int = DEFAULT_WORKERS,
               library: Library | None = None) -> FastAPI:
    """Build the app. The library loads lazily on first use unless an already
    loaded Library is passed; endpoints answer 503 until it is available."""
    app = FastAPI(title="stemweld service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    state = {"library": library, "jobs": None, "matrix_cache": {}}
    if cache_dir is None:
        cache_dir = Path(tempfile.mkdtemp(prefix="stemweld-renders-"))

    def get_library() -> Library:
        if state["library"] is None:
            if library_root is None:
                raise HTTPException(status_code=503, detail="library not loaded")
            lib = Library(Path(library_root))
            diags = lib.scan()
            if diags:
                raise HTTPException(
                    status_code=503,
                    detail="library failed validation: " + "; ".join(map(str, diags)),
                )
            state["library"] = lib
        return state["library"]

    def get_jobs() -> JobManager:
        if state["jobs"] is None:
            state["jobs"] = JobManager(get_library(), Path(cache_dir), workers)
        return state["jobs"]

    def get_matrix(source: str):
        cache = state["matrix_cache"]
        if source not in cache:
            lib = get_library()
            from .cli import _score_matrix
            try:
                cache[source] = _score_matrix(lib, source)
            except AnalysisError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        return cache[source]

    @app.get("/api/library")
    def library_endpoint():
        lib = get_library()
        return [
            {
                "id": t.song_id,
                "bpm": t.bpm,
                "key": {"tonic": t.key.tonic_name, "mode": t.key.mode},
                "duration": t.duration,
                "segments": [s.label for s in t.segments],
            }
            for _, t in sorted(lib.tracks.items())
        ]

    @app.get("/api/sources")
    def sources_endpoint():
        lib = get_library()
        sources = (["cocola"] if lib.scores is not None else [])
        sources += sorted(lib.embeddings)
        return {"sources": sources, "embedding_models": sorted(lib.embeddings)}

    @app.get("/api/rank")
    def rank_endpoint(base: str, role: str = "accompaniment", source: str = "cocola"):
        lib = get_library()
        if role not in ROLES:
            raise HTTPException(status_code=400, detail=f"bad role {role!r}")
        matrix = get_matrix(source)
        if base not in lib.tracks and base not in matrix.song_ids:
            raise HTTPException(status_code=404, detail=f"unknown song {base!r}")
        try:
            ranked = rank_candidates(matrix, base, role)
        except AnalysisError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            "base": base,
            "role": role,
            "source": source,
            "candidates": [
                {"rank": i + 1, "song_id": sid, "score": score}
                for i, (sid, score) in enumerate(ranked)
            ],
        }

    @app.post("/api/mashup")
    def submit_mashup(req: MashupRequest):
        lib = get_library()
        for sid in (req.base, req.donor):
            if sid not in lib.tracks:
                raise HTTPException(status_code=404, detail=f"unknown song {sid!r}")
        if req.donor_role not in ROLES:
            raise HTTPException(status_code=400, detail=f"bad role {req.donor_role!r}")
        try:
            job = get_jobs().submit(req)
        except PlanError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"job_id": job.job_id}

    @app.get("/api/mashup/{job_id}/status")
    def job_status(job_id: str):
        try:
            job = get_jobs().get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job.to_dict()

    @app.get("/api/mashup/{job_id}/audio")
    def job_audio(job_id: str, request: Request):
        try:
            job = get_jobs().get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        if job.state == FAILED:
            raise HTTPException(status_code=500, detail=job.error or "render failed")
        if job.state != DONE:
            raise HTTPException(
                status_code=409, detail=f"job is {job.state}, audio not ready"
            )
        data = job.output_path.read_bytes()
        headers = {"Accept-Ranges": "bytes"}
        range_header = request.headers.get("range")
        if range_header:
            try:
                unit, _, spec = range_header.partition("=")
                start_s, _, end_s = spec.partition("-")
                if unit.strip() != "bytes":
                    raise ValueError(range_header)
                if start_s:
                    start = int(start_s)
                    end = int(end_s) if end_s else len(data) - 1
                else:
                    # suffix form: last N bytes
                    start = max(0, len(data) - int(end_s))
                    end = len(data) - 1
                end = min(end, len(data) - 1)
                if start > end or start >= len(data):
                    raise ValueError(range_header)
            except ValueError:
                raise HTTPException(status_code=416, detail="bad range")
            headers["Content-Range"] = f"bytes {start}-{end}/{len(data)}"
            return Response(content=data[start:end + 1], status_code=206,
                            media_type="audio/wav", headers=headers)
        return Response(content=data, media_type="audio/wav", headers=headers)

    @app.get("/api/matrix")
    def matrix_endpoint(source: str = "cocola"):
        m = get_matrix(source)
        mean_abs, max_abs, frob = asymmetry_stats(m)
        values = [
            [None if v != v else float(v) for v in row]  # NaN -> null
            for row in m.values
        ]
        return {
            "source": source,
            "song_ids": list(m.song_ids),
            "values": values,
            "asymmetry": {
                "mean_abs_diff": mean_abs,
                "max_abs_diff": max_abs,
                "frobenius_index": frob,
            },
        }

    @app.get("/api/clusters")
    def clusters_endpoint(model: str, threshold: float, linkage: str = "average"):
        lib = get_library()
        if model not in lib.embeddings:
            raise HTTPException(status_code=422, detail=f"no embeddings for {model!r}")
        try:
            clustering = agglomerative_cluster(lib.embeddings[model], threshold, linkage)
        except AnalysisError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "model": model,
            "threshold": clustering.threshold,
            "linkage": clustering.linkage,
            "items": [list(i) for i in clustering.item_ids],
            "labels": list(clustering.labels),
            "n_clusters": clustering.n_clusters,
        }

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stemweld-serve")
    parser.add_argument("--library", required=True)
    parser.add_argument("--port", type=int, default=8237)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--cache-dir", default=None)
    parser.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    args = parser.parse_args(argv)

    import uvicorn

    app = create_app(library_root=args.library, cache_dir=args.cache_dir,
                     workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
