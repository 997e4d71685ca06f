import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.metrics import adjusted_rand_score

from beamdiar.annotation import Annotation, Region, merge_intervals
from beamdiar.diarization import (DEFAULT_ALPHA, ClusterLabels, NMESpectralClustering, SegmentList,
                                  assign_primary_labels, binarize_affinity, cosine_similarity_matrix, late_fuse,
                                  nme_sc, nme_sc_detailed, uniform_segments)
from beamdiar.exceptions import DegenerateEmbeddingError, DimensionError


def blocks(sizes):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return (labels[:, None] == labels[None, :]).astype(float), labels


class TestSegments:
    def test_full_tiling(self):
        seg = uniform_segments([(0, 10)], 1.0, 0.5)
        assert len(seg) == 19
        assert seg.intervals[0] == (0, 1) and seg.intervals[-1] == (9, 10)
        assert np.allclose(np.diff([a for a, _ in seg]), 0.5)

    def test_short_interval(self):
        assert uniform_segments([(0, 0.7)], 1.0, 0.5).intervals == [(0, 0.7)]

    def test_exact_window(self):
        assert uniform_segments([(0, 1.2)], 1.2, 0.6).intervals == [(0, 1.2)]

    def test_empty(self):
        assert len(uniform_segments([], 1.0, 0.5)) == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            uniform_segments([(0, 1)], 1.0, 1.5)
        with pytest.raises(ValueError):
            SegmentList("r", [(1, 2), (0, 1)])

    @given(st.lists(st.tuples(st.floats(0, 50), st.floats(0.05, 8)), max_size=6),
           st.sampled_from([(1.0, 0.5), (1.2, 0.6), (1.5, 0.75), (2.0, 2.0)]))
    def test_union_equals_vad(self, raw, scale):
        vad = [(a, a + d) for a, d in raw]
        seg = uniform_segments(vad, *scale)
        got, want = merge_intervals(seg.intervals), merge_intervals(vad)
        assert len(got) == len(want)
        assert np.allclose(got, want, atol=1e-9) if want else True
        assert all(b - a <= scale[0] + 1e-9 for a, b in seg)


class TestSimilarity:
    def test_examples(self):
        S = cosine_similarity_matrix([[1, 0], [0, 2], [3, 0], [1, 1]])
        assert S[0, 1] == 0 and np.isclose(S[0, 2], 1) and np.isclose(S[0, 3], 1 / np.sqrt(2), atol=1e-15)

    def test_zero_vector_names_index(self):
        with pytest.raises(DegenerateEmbeddingError, match="2"):
            cosine_similarity_matrix([[1, 0], [0, 1], [0, 0]])

    @given(st.integers(0, 2**16), st.integers(2, 12))
    def test_symmetric_unit_diagonal(self, seed, n):
        S = cosine_similarity_matrix(np.random.default_rng(seed).standard_normal((n, 5)))
        assert np.array_equal(S, S.T) and np.all(np.diag(S) == 1) and np.all(np.abs(S) <= 1)

    def test_late_fuse_endpoints(self, rng):
        A_x = cosine_similarity_matrix(rng.standard_normal((9, 4)))
        A_s = cosine_similarity_matrix(rng.standard_normal((9, 4)))
        assert np.array_equal(late_fuse(A_x, A_s, 1.0), A_x)
        assert np.array_equal(late_fuse(A_x, A_s, 0.0), A_s)
        assert DEFAULT_ALPHA == 0.95
        assert np.allclose(late_fuse(A_x, A_s), 0.95 * A_x + 0.05 * A_s)
        off = ~np.eye(9, dtype=bool)
        nn = lambda A: np.where(off, A, -np.inf).argmax(axis=1)
        assert np.array_equal(nn(late_fuse(A_x, A_s, 1.0)), nn(A_x))
        assert np.array_equal(nn(late_fuse(A_x, A_s, 0.0)), nn(A_s))

    def test_late_fuse_errors(self):
        with pytest.raises(DimensionError):
            late_fuse(np.eye(2), np.eye(3))
        with pytest.raises(ValueError):
            late_fuse(np.eye(2), np.eye(2), 1.5)


class TestNmeSc:
    def test_three_blocks(self):
        A, truth = blocks([10, 10, 10])
        # brute-force check of the premise: three zero Laplacian eigenvalues
        lam = np.linalg.eigvalsh(np.diag(A.sum(1)) - A)
        assert np.sum(np.abs(lam) < 1e-9) == 3
        res = nme_sc(A)
        assert res.k == 3 and adjusted_rand_score(truth, res.labels) == 1.0

    def test_all_ones(self):
        lam = np.linalg.eigvalsh(10 * np.eye(10) - np.ones((10, 10)))
        assert np.allclose(lam, [0] + [10] * 9)
        assert nme_sc(np.ones((10, 10)), max_speakers=4).k == 1

    def test_two_isolated(self):
        res = nme_sc(np.eye(2))
        assert res.k == 2 and list(res.labels) == [0, 1]

    def test_errors(self):
        with pytest.raises(DimensionError):
            nme_sc(np.ones((1, 1)))
        with pytest.raises(ValueError):
            nme_sc(np.eye(3), p_grid=[0.0])
        with pytest.raises(ValueError):
            ClusterLabels(np.array([0, 2]), 2)

    def test_binarization_ties_and_symmetry(self):
        A = np.array([[1, .9, .9, .1], [.9, 1, .2, .3], [.9, .2, 1, .3], [.1, .3, .3, 1]])
        B = binarize_affinity(A, 0.25)
        assert np.array_equal(B, B.T) and np.all(np.diag(B) == 1)
        assert B[0, 1] == B[0, 2] == 0
        assert np.array_equal(binarize_affinity(A, 0.5)[0], [1, 1, 1, 0])

    @given(st.integers(0, 2**16))
    def test_permutation_invariance(self, seed):
        r = np.random.default_rng(seed)
        k = int(r.integers(2, 5))
        truth = r.integers(0, k, 30)
        E = 10 * np.eye(8)[truth] + r.standard_normal((30, 8))
        A = cosine_similarity_matrix(E)
        perm = r.permutation(30)
        a = nme_sc(A).labels
        b = nme_sc(A[np.ix_(perm, perm)]).labels
        assert adjusted_rand_score(a[perm], b) == 1.0

    @given(st.integers(0, 2**16))
    def test_monotone_transform_invariance(self, seed):
        r = np.random.default_rng(seed)
        truth = np.repeat([0, 1, 2], 8)
        A = cosine_similarity_matrix(5 * np.eye(6)[truth] + r.standard_normal((24, 6)))
        T = np.where(np.eye(24, dtype=bool), A, np.tanh(3 * A) / 2)
        a, b = nme_sc_detailed(A), nme_sc_detailed(T)
        assert a.p == b.p and a.labels.k == b.labels.k
        assert np.array_equal(a.labels.labels, b.labels.labels)

    def test_estimator(self, rng):
        E = np.repeat(np.eye(4)[:2] * 10, 10, axis=0) + rng.standard_normal((20, 4))
        est = clone(NMESpectralClustering(affinity="cosine")).fit(E)
        assert est.n_clusters_ == 2 and len(est.labels_) == 20
        assert list(NMESpectralClustering().fit_predict(cosine_similarity_matrix(E))) == list(est.labels_)


class TestPrimaryLabels:
    def test_merge(self):
        ann = assign_primary_labels(SegmentList("r", [(0, 1), (0.5, 1.5)]), [0, 0])
        assert ann.regions == [Region("spk0", 0, 1.5)]

    def test_midpoint(self):
        ann = assign_primary_labels(SegmentList("r", [(0, 1), (0.5, 1.5)]), [0, 1])
        assert ann.regions == [Region("spk0", 0, 0.75), Region("spk1", 0.75, 1.5)]

    def test_empty(self):
        assert len(assign_primary_labels(SegmentList("r", []), np.array([], dtype=int))) == 0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            assign_primary_labels(SegmentList("r", [(0, 1)]), [0, 1])

    @given(st.lists(st.tuples(st.floats(0, 30), st.floats(0.2, 5)), min_size=1, max_size=5),
           st.integers(0, 2**16))
    def test_single_speaker_cover(self, raw, seed):
        seg = uniform_segments([(a, a + d) for a, d in raw], 1.5, 0.75, "r")
        labels = np.random.default_rng(seed).integers(0, 3, len(seg))
        ann = assign_primary_labels(seg, labels)
        assert np.allclose(merge_intervals(ann.speech()), merge_intervals(seg.intervals), atol=1e-9)
        assert ann.overlap() == []
        assert isinstance(ann, Annotation)
