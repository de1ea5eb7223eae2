"""stemweld: stem-level mashup engine and compatibility analysis toolkit.

Aligns two songs' separated stems in tempo, key and structure, renders the
mix, and analyzes stem compatibility from embeddings and directed pairwise
scores.
"""

__version__ = "0.1.0"

from .audio import AudioBuffer, Stem, read_wav, resample, write_wav
from .library import (FilterRules, Key, Library, Segment, StemEmbedding,
                      TrackAnalysis, default_filter_rules, filter_library,
                      load_analysis, load_cocola_scores, load_embeddings)
from .align import (MashupPlan, RoleAssignment, build_plan, key_shift_semitones,
                    pair_segments, schedule_fill)
from .tsm import TsmParams, WarpMap, apply_warp, build_warp_map, pitch_shift, time_stretch
from .render import RenderSettings, peak_normalize, render
from .analysis import (Clustering, CorrelationReport, DirectedScoreMatrix,
                       adjusted_rand_index, agglomerative_cluster, asymmetry_stats,
                       build_cocola_matrix, build_embedding_matrix, compat_report,
                       correlate, cosine_similarity, rank_candidates)

__all__ = [
    "AudioBuffer", "Stem", "read_wav", "resample", "write_wav",
    "FilterRules", "Key", "Library", "Segment", "StemEmbedding", "TrackAnalysis",
    "default_filter_rules", "filter_library", "load_analysis",
    "load_cocola_scores", "load_embeddings",
    "MashupPlan", "RoleAssignment", "build_plan", "key_shift_semitones",
    "pair_segments", "schedule_fill",
    "TsmParams", "WarpMap", "apply_warp", "build_warp_map", "pitch_shift",
    "time_stretch",
    "RenderSettings", "peak_normalize", "render",
    "Clustering", "CorrelationReport", "DirectedScoreMatrix",
    "adjusted_rand_index", "agglomerative_cluster", "asymmetry_stats",
    "build_cocola_matrix", "build_embedding_matrix", "compat_report",
    "correlate", "cosine_similarity", "rank_candidates",
]
