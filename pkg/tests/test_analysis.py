import numpy as np
import pytest

from stemweld.analysis import (AnalysisError, DirectedScoreMatrix,
                               adjusted_rand_index, agglomerative_cluster,
                               asymmetry_stats, build_cocola_matrix,
                               build_embedding_matrix, compat_report, correlate,
                               cosine_similarity, rank_candidates)
from stemweld.library import CocolaScoreSet, StemEmbedding


# ---------------------------------------------------------------------------
# Brute-force reference implementations (kept intentionally independent of
# the library's code paths: raw loops, no shared helpers).
# ---------------------------------------------------------------------------

def ari_by_pair_counting(a, b):
    """ARI from the pair-counting definition: 2(ad-bc)/((a+b)(b+d)+(a+c)(c+d))."""
    n = len(a)
    ss = sd = ds = dd = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a and same_b:
                ss += 1
            elif same_a:
                sd += 1
            elif same_b:
                ds += 1
            else:
                dd += 1
    denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd)
    if denom == 0:
        return 1.0
    return 2.0 * (ss * dd - sd * ds) / denom


def cluster_by_exhaustive_merging(vectors, threshold, linkage):
    """Reference agglomerative clustering over raw python sets."""
    def cos_dist(u, v):
        du = sum(x * x for x in u) ** 0.5
        dv = sum(x * x for x in v) ** 0.5
        return 1.0 - sum(x * y for x, y in zip(u, v)) / (du * dv)

    dist = [[cos_dist(u, v) for v in vectors] for u in vectors]
    parts = [frozenset([i]) for i in range(len(vectors))]
    while len(parts) > 1:
        best_d, best = None, None
        for i in range(len(parts)):
            for j in range(i + 1, len(parts)):
                ds = [dist[u][v] for u in parts[i] for v in parts[j]]
                if linkage == "single":
                    d = min(ds)
                elif linkage == "complete":
                    d = max(ds)
                else:
                    d = sum(ds) / len(ds)
                if best_d is None or d < best_d:
                    best_d, best = d, (i, j)
        if best_d > threshold:
            break
        i, j = best
        merged = parts[i] | parts[j]
        parts = [p for k, p in enumerate(parts) if k not in (i, j)]
        parts.append(merged)
    # canonical labels: order clusters by smallest member
    parts.sort(key=min)
    labels = [0] * len(vectors)
    for lab, p in enumerate(parts):
        for item in p:
            labels[item] = lab
    return labels


def pearson_by_definition(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = (sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y)) ** 0.5
    return num / den if den else None


def ranks_by_definition(x):
    out = [0.0] * len(x)
    for i, v in enumerate(x):
        less = sum(1 for u in x if u < v)
        equal = sum(1 for u in x if u == v)
        out[i] = less + (equal + 1) / 2.0
    return out


def kendall_by_pair_enumeration(x, y):
    n = len(x)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            sx = int(x[i] > x[j]) - int(x[i] < x[j])
            sy = int(y[i] > y[j]) - int(y[i] < y[j])
            if sx and sy:
                if sx == sy:
                    concordant += 1
                else:
                    discordant += 1
    n0 = n * (n - 1) / 2
    den = ((n0 - count_tie_pairs(x)) * (n0 - count_tie_pairs(y))) ** 0.5
    if den == 0:
        return None
    return (concordant - discordant) / den


def count_tie_pairs(x):
    total = 0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if x[i] == x[j]:
                total += 1
    return total


def embedding(song, role, vec, model="m"):
    return StemEmbedding(song_id=song, role=role, model_id=model, vector=tuple(vec))


def random_embedding_set(rng, n_songs, dim=5, model="m"):
    out = []
    for i in range(n_songs):
        for role in ("vocals", "accompaniment"):
            out.append(embedding(f"s{i:02d}", role, rng.normal(size=dim), model))
    return out


# ---------------------------------------------------------------------------


class TestCosine:
    def test_identical(self):
        assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_opposite(self):
        assert cosine_similarity([1.0, 2.0], [-1.0, -2.0]) == pytest.approx(-1.0)

    def test_scale_invariance(self, rng):
        for _ in range(20):
            u = rng.normal(size=6)
            v = rng.normal(size=6)
            a, b = rng.uniform(0.1, 10, size=2)
            assert cosine_similarity(a * u, b * v) == pytest.approx(
                cosine_similarity(u, v), abs=1e-12)

    def test_zero_norm_rejected(self):
        with pytest.raises(AnalysisError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestMatrices:
    def test_identical_role_vectors_give_symmetry(self, rng):
        embs = []
        for i in range(5):
            v = rng.normal(size=4)
            embs.append(embedding(f"s{i}", "vocals", v))
            embs.append(embedding(f"s{i}", "accompaniment", v))
        m = build_embedding_matrix(embs, "m")
        assert np.allclose(m.values, m.values.T)

    def test_21_songs_420_directed_pairs(self, rng):
        m = build_embedding_matrix(random_embedding_set(rng, 21), "m")
        assert m.values.shape == (21, 21)
        assert len(m.flatten_directed()) == 420

    def test_missing_role_reported(self, rng):
        embs = random_embedding_set(rng, 3)
        embs = [e for e in embs if not (e.song_id == "s01" and e.role == "vocals")]
        with pytest.raises(AnalysisError, match="s01"):
            build_embedding_matrix(embs, "m")

    def test_cocola_matrix_complete(self):
        ids = ["a", "b", "c"]
        entries = {(v, a): 0.1 * i for i, (v, a) in enumerate(
            (v, a) for v in ids for a in ids if v != a)}
        m = build_cocola_matrix(CocolaScoreSet(entries=entries), ids)
        assert m.values.shape == (3, 3)
        assert np.isnan(m.values[0, 0])
        assert m.values[0, 1] == entries[("a", "b")]

    def test_cocola_matrix_missing_direction(self):
        m = CocolaScoreSet(entries={("a", "b"): 0.5})
        with pytest.raises(AnalysisError, match=r"\('b', 'a'\)"):
            build_cocola_matrix(m, ["a", "b"])

    def test_single_song_matrix(self):
        m = build_cocola_matrix(CocolaScoreSet(entries={}), ["a"])
        assert m.values.shape == (1, 1)
        assert np.isnan(m.values[0, 0])


class TestAsymmetry:
    def test_symmetric_is_zero(self, rng):
        v = rng.normal(size=(4, 4))
        sym = (v + v.T) / 2
        m = DirectedScoreMatrix(("a", "b", "c", "d"), sym, "cocola")
        assert asymmetry_stats(m) == (0.0, 0.0, 0.0)

    def test_two_by_two_hand_case(self):
        vals = np.array([[np.nan, 0.8], [0.2, np.nan]])
        m = DirectedScoreMatrix(("a", "b"), vals, "cocola")
        mean_abs, max_abs, frob = asymmetry_stats(m)
        assert mean_abs == pytest.approx(0.6)
        assert max_abs == pytest.approx(0.6)
        assert frob == pytest.approx(0.6 / 1.0)  # sqrt(2*0.36)/sqrt(2*1.0)

    def test_matches_brute_force(self, rng):
        n = 6
        vals = rng.uniform(-1, 1, size=(n, n))
        m = DirectedScoreMatrix(tuple(f"s{i}" for i in range(n)), vals, "cocola")
        mean_abs, max_abs, frob = asymmetry_stats(m)
        diffs = [abs(vals[i, j] - vals[j, i])
                 for i in range(n) for j in range(i + 1, n)]
        assert mean_abs == pytest.approx(sum(diffs) / len(diffs), abs=1e-12)
        assert max_abs == pytest.approx(max(diffs), abs=1e-12)
        num = sum((vals[i, j] - vals[j, i]) ** 2
                  for i in range(n) for j in range(n) if i != j)
        den = sum((vals[i, j] + vals[j, i]) ** 2
                  for i in range(n) for j in range(n) if i != j)
        assert frob == pytest.approx((num / den) ** 0.5, abs=1e-12)


class TestRanking:
    def _matrix(self):
        # vocals of s0 over accompaniment of s1: 0.9, etc. (asymmetric)
        vals = np.array([
            [np.nan, 0.9, 0.1],
            [0.2, np.nan, 0.8],
            [0.7, 0.3, np.nan],
        ])
        return DirectedScoreMatrix(("s0", "s1", "s2"), vals, "cocola")

    def test_dominant_donor_first(self):
        ranked = rank_candidates(self._matrix(), "s0", "accompaniment")
        # column 0: s1 -> 0.2, s2 -> 0.7
        assert ranked == [("s2", 0.7), ("s1", 0.2)]

    def test_role_flip_changes_order(self):
        m = self._matrix()
        as_accomp = rank_candidates(m, "s0", "accompaniment")
        as_vocals = rank_candidates(m, "s0", "vocals")
        assert [s for s, _ in as_accomp] != [s for s, _ in as_vocals]

    def test_tie_breaks_lexicographic(self):
        vals = np.full((3, 3), 0.5)
        np.fill_diagonal(vals, np.nan)
        m = DirectedScoreMatrix(("zz", "aa", "mm"), vals, "cocola")
        ranked = rank_candidates(m, "zz", "vocals")
        assert [s for s, _ in ranked] == ["aa", "mm"]

    def test_monotone_transform_invariance(self, rng):
        vals = rng.uniform(0, 1, size=(5, 5))
        ids = tuple(f"s{i}" for i in range(5))
        m1 = DirectedScoreMatrix(ids, vals, "cocola")
        m2 = DirectedScoreMatrix(ids, np.exp(3 * vals), "cocola")
        r1 = rank_candidates(m1, "s2", "accompaniment")
        r2 = rank_candidates(m2, "s2", "accompaniment")
        assert [s for s, _ in r1] == [s for s, _ in r2]

    def test_unknown_song(self):
        with pytest.raises(AnalysisError):
            rank_candidates(self._matrix(), "nope", "vocals")


class TestClustering:
    def test_threshold_zero_singletons(self, rng):
        items = random_embedding_set(rng, 4)
        c = agglomerative_cluster(items, 0.0, "average")
        assert c.n_clusters == len(items)

    def test_threshold_two_single_cluster(self, rng):
        items = random_embedding_set(rng, 4)
        c = agglomerative_cluster(items, 2.0, "average")
        assert c.n_clusters == 1

    @pytest.mark.parametrize("linkage", ["single", "complete", "average"])
    def test_matches_brute_force(self, linkage, rng):
        for trial in range(12):
            n = int(rng.integers(2, 8))
            items = random_embedding_set(rng, n)[: int(rng.integers(2, 2 * n))]
            threshold = float(rng.uniform(0, 1.2))
            got = agglomerative_cluster(items, threshold, linkage)
            ref = cluster_by_exhaustive_merging(
                [e.vector for e in items], threshold, linkage)
            assert list(got.labels) == ref, (trial, linkage)

    def test_cluster_count_monotone_in_threshold(self, rng):
        items = random_embedding_set(rng, 6)
        counts = [agglomerative_cluster(items, t, "average").n_clusters
                  for t in np.linspace(0, 2, 10)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_labels_contiguous(self, rng):
        items = random_embedding_set(rng, 5)
        c = agglomerative_cluster(items, 0.7, "average")
        assert set(c.labels) == set(range(c.n_clusters))


class TestARI:
    def test_relabeling_gives_one(self):
        assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0

    def test_crossed_partition(self):
        assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(
            -0.5, abs=1e-12)

    def test_symmetric_and_permutation_invariant(self, rng):
        a = list(rng.integers(0, 4, size=30))
        b = list(rng.integers(0, 3, size=30))
        assert adjusted_rand_index(a, b) == pytest.approx(
            adjusted_rand_index(b, a), abs=1e-12)
        remap = {k: (k * 7 + 3) % 11 for k in set(a)}
        assert adjusted_rand_index([remap[x] for x in a], b) == pytest.approx(
            adjusted_rand_index(a, b), abs=1e-12)

    def test_matches_pair_counting_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 25))
            a = list(rng.integers(0, 4, size=n))
            b = list(rng.integers(0, 4, size=n))
            assert adjusted_rand_index(a, b) == pytest.approx(
                ari_by_pair_counting(a, b), abs=1e-12)

    def test_chance_level_near_zero(self, rng):
        fixed = [i % 4 for i in range(40)]
        vals = [adjusted_rand_index(fixed, list(rng.integers(0, 4, size=40)))
                for _ in range(1000)]
        assert abs(float(np.mean(vals))) <= 0.05

    def test_length_mismatch(self):
        with pytest.raises(AnalysisError):
            adjusted_rand_index([0, 1], [0, 1, 2])


class TestCorrelate:
    def test_perfect_linear(self):
        rep = correlate([1, 2, 3], [2, 4, 6])
        assert rep.pearson == pytest.approx(1.0)
        assert rep.spearman == pytest.approx(1.0)
        assert rep.kendall_tau == pytest.approx(1.0)

    def test_monotone_nonlinear(self):
        rep = correlate([1, 2, 3], [1, 4, 9])
        assert rep.pearson < 1.0
        assert rep.spearman == pytest.approx(1.0)
        assert rep.kendall_tau == pytest.approx(1.0)

    def test_kendall_balanced_case(self):
        rep = correlate([1, 2, 3, 4], [3, 1, 4, 2])
        assert rep.kendall_tau == pytest.approx(0.0, abs=1e-12)

    def test_matches_brute_force_with_ties(self, rng):
        for _ in range(40):
            n = int(rng.integers(3, 30))
            x = list(map(float, rng.integers(0, 6, size=n)))  # heavy ties
            y = list(map(float, rng.integers(0, 6, size=n)))
            rep = correlate(x, y)
            ref_p = pearson_by_definition(x, y)
            ref_s = pearson_by_definition(ranks_by_definition(x),
                                          ranks_by_definition(y))
            ref_k = kendall_by_pair_enumeration(x, y)
            for got, ref in ((rep.pearson, ref_p), (rep.spearman, ref_s),
                             (rep.kendall_tau, ref_k)):
                if ref is None:
                    assert got is None
                else:
                    assert got == pytest.approx(ref, abs=1e-12)

    def test_monotone_transform_invariance(self, rng):
        x = rng.normal(size=25)
        y = rng.normal(size=25)
        rep = correlate(x, y)
        rep2 = correlate(np.exp(x), y)
        assert rep2.spearman == pytest.approx(rep.spearman, abs=1e-12)
        assert rep2.kendall_tau == pytest.approx(rep.kendall_tau, abs=1e-12)

    def test_shared_permutation_invariance(self, rng):
        x = rng.normal(size=20)
        y = rng.normal(size=20)
        perm = rng.permutation(20)
        rep = correlate(x, y)
        rep2 = correlate(x[perm], y[perm])
        assert rep2.pearson == pytest.approx(rep.pearson, abs=1e-12)
        assert rep2.spearman == pytest.approx(rep.spearman, abs=1e-12)
        assert rep2.kendall_tau == pytest.approx(rep.kendall_tau, abs=1e-12)

    def test_zero_variance_pearson_none(self):
        rep = correlate([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        assert rep.pearson is None
        assert rep.spearman is None  # rank variance is zero too
        assert rep.kendall_tau is None

    def test_bounds(self, rng):
        for _ in range(20):
            x = rng.normal(size=15)
            y = rng.normal(size=15)
            rep = correlate(x, y)
            for v in (rep.pearson, rep.spearman, rep.kendall_tau):
                assert -1.0 <= v <= 1.0


class TestCompatReport:
    def _scores_from_matrix(self, ids, values):
        entries = {}
        for i, v in enumerate(ids):
            for j, a in enumerate(ids):
                if i != j:
                    entries[(v, a)] = float(values[i, j])
        return CocolaScoreSet(entries=entries)

    def test_equal_matrices_give_pearson_one(self, rng):
        embs = random_embedding_set(rng, 5)
        m = build_embedding_matrix(embs, "m")
        scores = self._scores_from_matrix(m.song_ids, m.values)
        report = compat_report(embs, scores, "m")
        assert report["correlation"]["pearson"] == pytest.approx(1.0)
        assert report["n_directed_pairs"] == 20

    def test_independent_matrices_near_zero(self, rng):
        coeffs = []
        for seed in range(40):
            local = np.random.default_rng(seed)
            embs = random_embedding_set(local, 21)
            ids = sorted({e.song_id for e in embs})
            vals = local.uniform(0, 1, size=(21, 21))
            scores = self._scores_from_matrix(ids, vals)
            rep = compat_report(embs, scores, "m")["correlation"]
            coeffs.append(max(abs(rep["pearson"]), abs(rep["spearman"]),
                              abs(rep["kendall_tau"])))
        assert float(np.quantile(coeffs, 0.95)) < 0.25

    def test_song_set_mismatch(self, rng):
        embs = random_embedding_set(rng, 3)
        scores = CocolaScoreSet(entries={("s00", "s01"): 0.5, ("s01", "s00"): 0.4})
        with pytest.raises(AnalysisError, match="missing"):
            compat_report(embs, scores, "m")

    def test_clustering_section_per_threshold(self, rng):
        embs = random_embedding_set(rng, 4)
        m = build_embedding_matrix(embs, "m")
        scores = self._scores_from_matrix(m.song_ids, m.values)
        report = compat_report(embs, scores, "m", thresholds=[0.0, 2.0])
        assert len(report["clusterings"]) == 2
        assert report["clusterings"][0]["n_clusters"] == 8
        assert report["clusterings"][1]["n_clusters"] == 1
        bare = compat_report(embs, scores, "m")
        assert "clusterings" not in bare


class TestCsvExport:
    def test_header_row_and_column(self):
        vals = np.array([[np.nan, 0.5], [0.25, np.nan]])
        m = DirectedScoreMatrix(("a", "b"), vals, "cocola")
        text = m.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == ",a,b"
        assert lines[1].startswith("a,") and lines[2].startswith("b,")
        assert "0.5" in lines[1] and "0.25" in lines[2]
