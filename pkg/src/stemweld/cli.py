"""Command-line entry points: validate, rank, render, report.

Exit codes: 0 success, 1 validation/domain failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (AnalysisError, build_cocola_matrix, build_embedding_matrix,
                       compat_report, rank_candidates)
from .library import Library, LibraryError
from .pipeline import PipelineError, render_mashup
from .render import RenderSettings

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_IO = 2


def _load_library(path: str) -> Library:
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"library directory {root} does not exist")
    lib = Library(root)
    diags = lib.scan()
    if diags:
        raise LibraryError("; ".join(str(d) for d in diags))
    return lib


def _score_matrix(lib: Library, source: str):
    """Resolve a score source name: 'cocola' or an embedding model id."""
    if source == "cocola":
        if lib.scores is None:
            raise AnalysisError("no scores/cocola.csv in library")
        ids = lib.song_ids() or lib.scores.song_ids()
        return build_cocola_matrix(lib.scores, ids)
    if source not in lib.embeddings:
        raise AnalysisError(
            f"no embedding file for model {source!r} "
            f"(available: {', '.join(sorted(lib.embeddings)) or 'none'})"
        )
    return build_embedding_matrix(lib.embeddings[source], source)


def cmd_validate(args) -> int:
    lib = Library(Path(args.library))
    if not lib.root.is_dir():
        print(f"error: library directory {lib.root} does not exist", file=sys.stderr)
        return EXIT_IO
    diags = lib.validate()
    for d in diags:
        print(str(d))
    if diags:
        print(f"{len(diags)} violation(s)")
        return EXIT_VIOLATION
    print(f"ok: {len(lib.tracks)} track(s), {len(lib.embeddings)} embedding model(s)"
          f"{', scores present' if lib.scores else ''}")
    return EXIT_OK


def cmd_rank(args) -> int:
    lib = _load_library(args.library)
    matrix = _score_matrix(lib, args.source)
    ranked = rank_candidates(matrix, args.base, args.base_role)
    if args.format == "json":
        print(json.dumps([
            {"rank": i + 1, "song_id": sid, "score": score}
            for i, (sid, score) in enumerate(ranked)
        ], indent=2))
        return EXIT_OK
    width = max([len("song")] + [len(sid) for sid, _ in ranked])
    print(f"{'rank':>4}  {'song':<{width}}  score")
    for i, (sid, score) in enumerate(ranked):
        print(f"{i + 1:>4}  {sid:<{width}}  {score:.6f}")
    return EXIT_OK


def cmd_render(args) -> int:
    lib = _load_library(args.library)
    settings = RenderSettings(
        output_bit_depth=args.bit_depth,
        donor_gain=args.donor_gain,
        base_gain=args.base_gain,
        normalize_peak_dbfs=args.peak_dbfs,
    )
    paths = render_mashup(
        lib, args.base, args.donor, args.out,
        donor_role=args.donor_role,
        allow_self=args.allow_self,
        semitones=args.semitones,
        tempo_ratio=args.tempo_ratio,
        settings=settings,
    )
    print(f"wrote {paths.audio}")
    print(f"wrote {paths.plan}")
    print(f"wrote {paths.report}")
    return EXIT_OK


def cmd_report(args) -> int:
    lib = _load_library(args.library)
    if lib.scores is None:
        raise AnalysisError("no scores/cocola.csv in library")
    if args.model not in lib.embeddings:
        raise AnalysisError(f"no embedding file for model {args.model!r}")
    doc = compat_report(
        lib.embeddings[args.model], lib.scores, args.model,
        thresholds=args.threshold, linkage=args.linkage,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    if args.export_matrices:
        from .analysis import DirectedScoreMatrix  # local: csv needs the objects
        for name in ("embedding_cosine", "cocola"):
            payload = doc["matrices"][name]
            values = [[float("nan") if v is None else v for v in row]
                      for row in payload["values"]]
            m = DirectedScoreMatrix(
                song_ids=tuple(payload["song_ids"]), values=values,
                source=payload["source"], model_id=payload["model_id"],
            )
            csv_path = Path(args.export_matrices) / f"{name}.csv"
            csv_path.parent.mkdir(parents=True, exist_ok=True)
            csv_path.write_text(m.to_csv(), encoding="utf-8")
            print(f"wrote {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stemweld",
        description="Stem mashup engine: validate libraries, rank candidates, "
                    "render mashups, and run compatibility reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check every library artifact")
    p.add_argument("--library", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rank", help="rank donor candidates for a base song")
    p.add_argument("--library", required=True)
    p.add_argument("--base", required=True, help="base song id")
    p.add_argument("--base-role", choices=["vocals", "accompaniment"],
                   default="accompaniment",
                   help="role the base song keeps; donors supply the other")
    p.add_argument("--source", default="cocola",
                   help="'cocola' or an embedding model id (e.g. clap, mert)")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("render", help="render a mashup to WAV")
    p.add_argument("--library", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--donor", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--donor-role", choices=["vocals", "accompaniment"],
                   default="vocals")
    p.add_argument("--allow-self", action="store_true",
                   help="permit base == donor")
    p.add_argument("--semitones", type=float, default=None,
                   help="override the computed key shift")
    p.add_argument("--tempo-ratio", type=float, default=None,
                   help="override grid warping with one uniform stretch ratio")
    p.add_argument("--donor-gain", type=float, default=1.0)
    p.add_argument("--base-gain", type=float, default=1.0)
    p.add_argument("--peak-dbfs", type=float, default=-1.0)
    p.add_argument("--bit-depth", choices=["pcm16", "float32"], default="pcm16")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("report", help="embedding-vs-score compatibility report")
    p.add_argument("--library", required=True)
    p.add_argument("--model", required=True, help="embedding model id")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, action="append", default=[],
                   help="clustering threshold; repeatable")
    p.add_argument("--linkage", choices=["single", "complete", "average"],
                   default="average")
    p.add_argument("--export-matrices", default=None, metavar="DIR",
                   help="also write both matrices as CSV into DIR")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LibraryError, AnalysisError, PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
