"""Directed compatibility analysis over stem embeddings and pairwise scores.

Compatibility is directional: values[v][a] scores the vocals of song v over
the accompaniment of song a, and the reverse pairing is a separate entry.
This module builds those matrices, quantifies their asymmetry, ranks mashup
candidates, clusters embeddings by thresholded cosine distance, and compares
two score sources with Pearson/Spearman/Kendall correlations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import ACCOMPANIMENT, ROLES, VOCALS
from .library import CocolaScoreSet

LINKAGES = ("single", "complete", "average")


class AnalysisError(ValueError):
    pass


def cosine_similarity(u, v) -> float:
    """<u,v> / (|u||v|), in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise AnalysisError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise AnalysisError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class DirectedScoreMatrix:
    """n x n directed scores; rows are vocal donors, columns accompaniment donors.

    Diagonal entries are NaN unless self-pairs were explicitly supplied.
    """

    song_ids: tuple
    values: np.ndarray
    source: str  # "cocola" or "embedding_cosine"
    model_id: str | None = None

    def __post_init__(self):
        ids = tuple(self.song_ids)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(ids), len(ids)):
            raise AnalysisError(
                f"matrix shape {vals.shape} does not match {len(ids)} songs"
            )
        object.__setattr__(self, "song_ids", ids)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.song_ids)

    def index(self, song_id: str) -> int:
        try:
            return self.song_ids.index(song_id)
        except ValueError:
            raise AnalysisError(f"unknown song {song_id!r}") from None

    def flatten_directed(self) -> list:
        """Off-diagonal values in row-major (vocal, accompaniment) order."""
        out = []
        for i in range(self.n):
            for j in range(self.n):
                if i != j:
                    out.append(float(self.values[i, j]))
        return out

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.song_ids)]
        for i, sid in enumerate(self.song_ids):
            row = [sid] + [
                "" if np.isnan(self.values[i, j]) else repr(float(self.values[i, j]))
                for j in range(self.n)
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Clustering:
    item_ids: tuple   # (song_id, role) pairs
    labels: tuple     # contiguous ints from 0
    threshold: float
    linkage: str

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels))

    def groups(self) -> list:
        out: dict = {}
        for item, lab in zip(self.item_ids, self.labels):
            out.setdefault(lab, []).append(item)
        return [out[k] for k in sorted(out)]


@dataclass(frozen=True)
class CorrelationReport:
    """Pearson / Spearman / Kendall tau-b; a coefficient is None when its
    denominator vanishes (zero variance or all ties)."""

    pearson: float | None
    spearman: float | None
    kendall_tau: float | None
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "pearson": self.pearson,
            "spearman": self.spearman,
            "kendall_tau": self.kendall_tau,
            "n_pairs": self.n_pairs,
        }


def _embeddings_by_song(embeddings, model_id: str) -> dict:
    table: dict = {}
    for emb in embeddings:
        if emb.model_id == model_id:
            table.setdefault(emb.song_id, {})[emb.role] = np.asarray(emb.vector)
    if not table:
        raise AnalysisError(f"no embeddings for model {model_id!r}")
    return table


def build_embedding_matrix(embeddings, model_id: str) -> DirectedScoreMatrix:
    """values[v][a] = cosine(vocals of song v, accompaniment of song a)."""
    table = _embeddings_by_song(embeddings, model_id)
    for sid in sorted(table):
        for role in ROLES:
            if role not in table[sid]:
                raise AnalysisError(f"song {sid!r} missing {role} embedding "
                                    f"for model {model_id!r}")
    ids = sorted(table)
    n = len(ids)
    vocals = np.vstack([table[s][VOCALS] for s in ids])
    accomp = np.vstack([table[s][ACCOMPANIMENT] for s in ids])
    vn = vocals / np.linalg.norm(vocals, axis=1, keepdims=True)
    an = accomp / np.linalg.norm(accomp, axis=1, keepdims=True)
    values = np.clip(vn @ an.T, -1.0, 1.0)
    return DirectedScoreMatrix(song_ids=tuple(ids), values=values,
                               source="embedding_cosine", model_id=model_id)


def build_cocola_matrix(scores: CocolaScoreSet, song_ids) -> DirectedScoreMatrix:
    """Matrix over song_ids from directed score entries; every off-diagonal
    ordered pair must be present."""
    ids = list(song_ids)
    n = len(ids)
    values = np.full((n, n), np.nan)
    for i, v in enumerate(ids):
        for j, a in enumerate(ids):
            if i == j:
                if (v, a) in scores.entries:
                    values[i, j] = scores.entries[(v, a)]
                continue
            if (v, a) not in scores.entries:
                raise AnalysisError(f"missing directed score for pair ({v!r}, {a!r})")
            values[i, j] = scores.entries[(v, a)]
    return DirectedScoreMatrix(song_ids=tuple(ids), values=values, source="cocola")


def asymmetry_stats(m: DirectedScoreMatrix) -> tuple:
    """(mean_abs_diff, max_abs_diff, frobenius_index) over off-diagonal pairs.

    frobenius_index = |M - M^T|_F / |M + M^T|_F restricted to off-diagonal
    entries; 0 exactly when the matrix is symmetric there.
    """
    if m.n < 2:
        raise AnalysisError("asymmetry needs at least 2 songs")
    diffs = []
    num = 0.0
    den = 0.0
    for i in range(m.n):
        for j in range(m.n):
            if i == j:
                continue
            d = m.values[i, j] - m.values[j, i]
            s = m.values[i, j] + m.values[j, i]
            num += d * d
            den += s * s
            if i < j:
                diffs.append(abs(d))
    mean_abs = float(np.mean(diffs))
    max_abs = float(np.max(diffs))
    frob = float(np.sqrt(num) / np.sqrt(den)) if den > 0 else 0.0
    return (mean_abs, max_abs, frob)


def rank_candidates(m: DirectedScoreMatrix, base_song: str, base_role: str) -> list:
    """Donor songs ranked against a fixed base, best first.

    A vocals base ranks accompaniment donors along its row; an accompaniment
    base ranks vocal donors down its column. Ties break lexicographically.
    """
    if base_role not in ROLES:
        raise AnalysisError(f"base_role must be one of {ROLES}")
    b = m.index(base_song)
    scored = []
    for i, sid in enumerate(m.song_ids):
        if i == b:
            continue
        value = m.values[i, b] if base_role == ACCOMPANIMENT else m.values[b, i]
        if np.isnan(value):
            continue
        scored.append((sid, float(value)))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def _linkage_distance(dist: np.ndarray, a, b, linkage: str) -> float:
    block = dist[np.ix_(a, b)]
    if linkage == "single":
        return float(block.min())
    if linkage == "complete":
        return float(block.max())
    return float(block.mean())


def _agglomerate(dist: np.ndarray, threshold: float, linkage: str) -> list:
    """Merge closest clusters (ties to the smallest index pair) until the
    minimal inter-cluster distance exceeds the threshold; returns label list."""
    n = dist.shape[0]
    clusters = [[i] for i in range(n)]
    while len(clusters) > 1:
        best = None
        best_pair = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                d = _linkage_distance(dist, clusters[i], clusters[j], linkage)
                if best is None or d < best:
                    best = d
                    best_pair = (i, j)
        if best > threshold:
            break
        i, j = best_pair
        clusters[i] = sorted(clusters[i] + clusters[j])
        del clusters[j]
    labels = [0] * n
    for lab, members in enumerate(clusters):
        for item in members:
            labels[item] = lab
    return labels


def agglomerative_cluster(items, threshold: float,
                          linkage: str = "average") -> Clustering:
    """Bottom-up clustering of stem embeddings on cosine distance (1 - cos)."""
    if linkage not in LINKAGES:
        raise AnalysisError(f"linkage must be one of {LINKAGES}")
    if threshold < 0:
        raise AnalysisError("threshold must be >= 0")
    items = list(items)
    if not items:
        raise AnalysisError("need at least one item")
    dims = {len(e.vector) for e in items}
    if len(dims) > 1:
        raise AnalysisError(f"mixed embedding dimensions: {sorted(dims)}")
    vecs = np.vstack([np.asarray(e.vector) for e in items])
    normed = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    dist = 1.0 - np.clip(normed @ normed.T, -1.0, 1.0)
    np.fill_diagonal(dist, 0.0)
    labels = _agglomerate(dist, threshold, linkage)
    return Clustering(
        item_ids=tuple((e.song_id, e.role) for e in items),
        labels=tuple(labels),
        threshold=float(threshold),
        linkage=linkage,
    )


def _comb2(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(x * (x - 1) / 2.0))


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected partition agreement from the contingency table:
    (sum_ij C(n_ij,2) - E) / (0.5*(sum_i C(a_i,2) + sum_j C(b_j,2)) - E)."""
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise AnalysisError(f"label lists differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise AnalysisError("need at least 2 items")
    a_ids = {lab: i for i, lab in enumerate(dict.fromkeys(a))}
    b_ids = {lab: i for i, lab in enumerate(dict.fromkeys(b))}
    table = np.zeros((len(a_ids), len(b_ids)))
    for la, lb in zip(a, b):
        table[a_ids[la], b_ids[lb]] += 1
    sum_ij = _comb2(table)
    sum_a = _comb2(table.sum(axis=1))
    sum_b = _comb2(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0.0:
        # Both partitions all-singletons or all-one-cluster: identical.
        return 1.0
    return float((sum_ij - expected) / denom)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xm = x - x.mean()
    ym = y - y.mean()
    den = np.sqrt(np.sum(xm * xm) * np.sum(ym * ym))
    if den == 0.0:
        return None
    return float(np.clip(np.sum(xm * ym) / den, -1.0, 1.0))


def _kendall_tau_b(x: np.ndarray, y: np.ndarray) -> float | None:
    n = len(x)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    prod = dx[iu] * dy[iu]
    concordant_minus_discordant = float(np.sum(prod))
    n0 = n * (n - 1) / 2.0
    n1 = n0 - float(np.sum(np.abs(dx[iu])))  # tied pairs in x
    n2 = n0 - float(np.sum(np.abs(dy[iu])))
    den = np.sqrt((n0 - n1) * (n0 - n2))
    if den == 0.0:
        return None
    return float(np.clip(concordant_minus_discordant / den, -1.0, 1.0))


def correlate(x, y) -> CorrelationReport:
    """Pearson on raw values, Spearman as Pearson on average ranks, Kendall
    tau-b with tie correction."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise AnalysisError(f"need equal-length 1-D inputs, got {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise AnalysisError("need at least 2 observations")
    return CorrelationReport(
        pearson=_pearson(x, y),
        spearman=_pearson(_average_ranks(x), _average_ranks(y)),
        kendall_tau=_kendall_tau_b(x, y),
        n_pairs=len(x),
    )


def compat_report(embeddings, scores: CocolaScoreSet, model_id: str,
                  thresholds=(), linkage: str = "average") -> dict:
    """Compare embedding-cosine and pairwise-score matrices over one song set.

    Both matrices are flattened over off-diagonal directed pairs in the same
    row-major order and correlated; asymmetry stats are attached for each, and
    a clustering summary per requested threshold.
    """
    emb_matrix = build_embedding_matrix(embeddings, model_id)
    score_ids = set(scores.song_ids())
    missing = [s for s in emb_matrix.song_ids if s not in score_ids]
    if missing:
        raise AnalysisError(
            f"songs missing from score set: {', '.join(sorted(missing))}"
        )
    cocola_matrix = build_cocola_matrix(scores, emb_matrix.song_ids)

    xs = emb_matrix.flatten_directed()
    ys = cocola_matrix.flatten_directed()
    corr = correlate(xs, ys)

    def asym(m):
        mean_abs, max_abs, frob = asymmetry_stats(m)
        return {"mean_abs_diff": mean_abs, "max_abs_diff": max_abs,
                "frobenius_index": frob}

    report = {
        "model_id": model_id,
        "song_ids": list(emb_matrix.song_ids),
        "n_directed_pairs": corr.n_pairs,
        "correlation": corr.to_dict(),
        "asymmetry": {
            "embedding_cosine": asym(emb_matrix),
            "cocola": asym(cocola_matrix),
        },
        "matrices": {
            "embedding_cosine": _matrix_payload(emb_matrix),
            "cocola": _matrix_payload(cocola_matrix),
        },
    }
    if thresholds:
        model_items = [e for e in embeddings if e.model_id == model_id]
        report["clusterings"] = []
        for t in thresholds:
            clustering = agglomerative_cluster(model_items, t, linkage)
            report["clusterings"].append({
                "threshold": float(t),
                "linkage": linkage,
                "items": [list(i) for i in clustering.item_ids],
                "labels": list(clustering.labels),
                "n_clusters": clustering.n_clusters,
            })
    return report


def _matrix_payload(m: DirectedScoreMatrix) -> dict:
    values = [
        [None if np.isnan(v) else float(v) for v in row]
        for row in m.values
    ]
    return {"song_ids": list(m.song_ids), "values": values, "source": m.source,
            "model_id": m.model_id}
