import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamdiar.annotation import Annotation, Region, same_label_function
from beamdiar.exceptions import DataError
from beamdiar.fusion import fuse, fuse_campaign, map_labels, rank_weights, vote
from beamdiar.scoring import emit_rttm, parse_rttm

A = lambda *regions: Annotation("R", [Region(*r) for r in regions])


def jittered_turns(r, n_turns=6, n_hyp=3):
    bounds = np.cumsum(r.uniform(1.0, 3.0, n_turns + 1))
    hyps = []
    for h in range(n_hyp):
        b = bounds.copy()
        b[1:-1] += r.uniform(-0.3, 0.3, n_turns - 1)
        names = (f"h{h}a", f"h{h}b")
        hyps.append(A(*[(names[i % 2], b[i], b[i + 1]) for i in range(n_turns)]))
    return hyps


class TestMapping:
    def test_renaming_absorbed(self):
        h1 = A(("a", 0, 5), ("b", 5, 9))
        h2 = A(("x", 0, 5), ("y", 5, 9))
        (m1, m2), names = map_labels([h1, h2])
        assert m1.regions == m2.regions and names == ["a", "b"]

    def test_disjoint_kept_distinct(self):
        (m1, m2), _ = map_labels([A(("a", 0, 1)), A(("b", 2, 3))])
        assert {r.speaker for r in m1} != {r.speaker for r in m2}

    def test_agreeing_pair_shares_ids(self):
        h1 = A(("a", 0, 4), ("b", 4, 8))
        h2 = A(("p", 0, 1), ("q", 1, 8))
        h3 = A(("u", 0, 4.2), ("v", 4.2, 8))
        (m1, m2, m3), _ = map_labels([h1, h2, h3])
        # overlap table: u-a 4, v-b 3.8, so h3 follows h1
        assert m3.labels_at(2) == m1.labels_at(2) and m3.labels_at(6) == m1.labels_at(6)


class TestVote:
    def test_rank_weights(self):
        assert np.allclose(rank_weights(3), np.array([1, 1 / 2, 1 / 3]) / (11 / 6))

    def test_idempotence(self):
        h = A(("a", 0, 3), ("b", 2, 6), ("a", 7, 9))
        assert same_label_function(fuse([h, h, h]), h, up_to_renaming=False)
        assert same_label_function(fuse([h, h]), h, up_to_renaming=False)

    def test_majority(self):
        h1 = A(("a", 0, 5), ("b", 5, 10))
        h3 = A(("a", 0, 7), ("b", 7, 10))
        out = fuse([h1, h1, h3], weights=[1, 1, 1])
        assert out.labels_at(6) == {"b"} and same_label_function(out, h1, up_to_renaming=False)
        # default 1/rank weights: the first input alone carries 6/11 of the mass
        assert fuse([h3, h1, h1]).labels_at(6) == {"a"}

    def test_unanimous_overlap(self):
        h = A(("a", 0, 6), ("b", 4, 10))
        out = fuse([h, A(("x", 0, 6), ("y", 4, 10)), h])
        assert len(out.labels_at(5)) == 2 and out.overlap() == [(4, 6)]

    def test_perfect_plus_empty(self):
        perfect = A(("a", 0, 4), ("b", 4, 9))
        mapped, names = map_labels([perfect, Annotation("R")])
        assert same_label_function(vote(mapped, [1, 1e-6], names), perfect, up_to_renaming=False)
        assert same_label_function(fuse([perfect, Annotation("R")], [1, 1e-6]), perfect, up_to_renaming=False)

    def test_errors(self):
        with pytest.raises(ValueError):
            fuse([A(("a", 0, 1))])
        with pytest.raises(DataError):
            fuse([A(("a", 0, 1)), Annotation("S", [Region("a", 0, 1)])])
        with pytest.raises(ValueError):
            fuse([A(("a", 0, 1))] * 2, weights=[1, 0])

    @given(st.integers(0, 2**16))
    def test_order_invariance(self, seed):
        hyps = jittered_turns(np.random.default_rng(seed))
        outs = [fuse([hyps[i] for i in p], weights=[1, 1, 1]) for p in itertools.permutations(range(3))]
        assert all(same_label_function(outs[0], o) for o in outs[1:])

    @given(st.integers(0, 2**16))
    def test_count_bounded_by_inputs(self, seed):
        r = np.random.default_rng(seed)
        hyps = []
        for _ in range(3):
            regs = [(f"s{r.integers(3)}", a, a + r.uniform(0.2, 3)) for a in r.uniform(0, 10, 4)]
            hyps.append(A(*regs))
        out = fuse(hyps)
        for t in np.linspace(0.01, 13, 200):
            assert len(out.labels_at(t)) <= max(len(h.labels_at(t)) for h in hyps)


class TestCampaign:
    def test_round_trip_and_idempotence(self, tmp_path):
        anns = [A(("a", 0, 3), ("b", 3, 5)), Annotation("S", [Region("c", 1, 2)])]
        for i in range(3):
            emit_rttm(anns, tmp_path / f"h{i}.rttm")
        fused = fuse_campaign([tmp_path / f"h{i}.rttm" for i in range(3)], out=tmp_path / "f.rttm")
        assert [f.recording_id for f in fused] == ["R", "S"]
        assert (tmp_path / "f.rttm").read_text() == (tmp_path / "h0.rttm").read_text()
        assert len(parse_rttm(tmp_path / "f.rttm")) == 2

    def test_recording_mismatch(self, tmp_path):
        emit_rttm([A(("a", 0, 1))], tmp_path / "a.rttm")
        emit_rttm([A(("a", 0, 1)), Annotation("S", [Region("a", 0, 1)])], tmp_path / "b.rttm")
        with pytest.raises(DataError, match="missing \\['S'\\]"):
            fuse_campaign([tmp_path / "a.rttm", tmp_path / "b.rttm"])
