import numpy as np
import pytest

from sasvfuse.data import DataError, Embedding, Trial, TrialClass
from sasvfuse.scoring import (CmHead, SCORE_MEAN, cm_score, cosine_score,
                              enroll_centroid, score_all)


def _emb(utt_id, values):
    return Embedding(utt_id, np.asarray(values, dtype=np.float64))


class TestEnrollCentroid:
    def test_single_identity(self):
        c = enroll_centroid([_emb("a", [1.0, 0.0])])
        assert np.allclose(c.values, [1.0, 0.0], atol=1e-15)

    def test_symmetric_pair(self):
        c = enroll_centroid([_emb("a", [1.0, 0.0]), _emb("b", [0.0, 1.0])])
        assert np.allclose(c.values, [np.sqrt(2) / 2, np.sqrt(2) / 2], atol=1e-15)

    def test_zero_mean_error(self):
        with pytest.raises(ValueError, match="zero"):
            enroll_centroid([_emb("a", [1.0, 0.0]), _emb("b", [-1.0, 0.0])])

    def test_empty_error(self):
        with pytest.raises(ValueError):
            enroll_centroid([])

    def test_unit_norm(self):
        rng = np.random.default_rng(1)
        embs = [_emb(f"u{i}", rng.normal(size=16)) for i in range(5)]
        c = enroll_centroid(embs)
        assert abs(np.linalg.norm(c.values) - 1.0) < 1e-9


class TestCosine:
    def test_identical(self):
        e = _emb("a", [0.3, 0.4])
        assert cosine_score(e, e) == 1.0

    def test_orthogonal(self):
        assert cosine_score(_emb("a", [1, 0]), _emb("b", [0, 1])) == 0.0

    def test_high_precision_value(self):
        got = cosine_score(_emb("a", [1, 1, 0]), _emb("b", [1, 0, 0]))
        assert got == pytest.approx(0.7071067811865476, abs=1e-15)

    def test_symmetry_and_scale(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = _emb("a", rng.normal(size=8))
            b = _emb("b", rng.normal(size=8))
            assert cosine_score(a, b) == cosine_score(b, a)
            assert abs(cosine_score(a, b)) <= 1.0
            scaled = _emb("c", 3.7 * a.values)
            assert cosine_score(a, scaled) == pytest.approx(1.0, abs=1e-12)

    def test_zero_norm_error(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_score(_emb("a", [0.0, 0.0]), _emb("b", [1.0, 0.0]))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_score(_emb("a", [1.0]), _emb("b", [1.0, 0.0]))


class TestCmScore:
    def test_zero_map(self):
        head = CmHead(weights=np.zeros(4), bias=0.0)
        assert cm_score(head, _emb("x", [5, -2, 1, 9])) == 0.0

    def test_basis_projection(self):
        head = CmHead(weights=np.array([1.0, 0.0, 0.0]), bias=0.0)
        assert cm_score(head, _emb("x", [2.5, 7.0, -1.0])) == 2.5

    def test_affine_value(self):
        head = CmHead(weights=np.array([0.5, -1.0]), bias=0.1)
        assert cm_score(head, _emb("x", [2.0, 1.0])) == pytest.approx(0.1, abs=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        head = CmHead(weights=rng.normal(size=6), bias=0.37)
        for _ in range(50):
            x, y = rng.normal(size=6), rng.normal(size=6)
            a, b = rng.normal(), rng.normal()
            lhs = cm_score(head, _emb("z", a * x + b * y))
            rhs = (a * cm_score(head, _emb("x", x)) + b * cm_score(head, _emb("y", y))
                   - (a + b - 1) * head.bias)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_dim_mismatch(self):
        head = CmHead(weights=np.ones(3), bias=0.0)
        with pytest.raises(ValueError):
            cm_score(head, _emb("x", [1.0, 2.0]))


class TestScoreAll:
    def _toy(self):
        asv = {
            "e1": _emb("e1", [1.0, 0.0, 0.0]),
            "e2": _emb("e2", [0.0, 1.0, 0.0]),
            "t1": _emb("t1", [0.9, 0.1, 0.0]),
            "t2": _emb("t2", [0.0, 0.8, 0.6]),
        }
        cm = {
            "t1": _emb("t1", [1.0, 0.0]),
            "t2": _emb("t2", [-2.0, 0.5]),
        }
        enrollment = {"s1": ["e1"], "s2": ["e2"]}
        head = CmHead(weights=np.array([1.0, 1.0]), bias=0.0)
        return asv, cm, enrollment, head

    def test_shapes_and_ranges(self):
        asv, cm, enr, head = self._toy()
        trials = [Trial("s1", "t1", TrialClass.TARGET),
                  Trial("s2", "t1", TrialClass.NONTARGET),
                  Trial("s2", "t2", TrialClass.TARGET)]
        records = score_all(trials, enr, asv, cm, head)
        assert len(records) == 3
        assert [r.trial for r in records] == trials
        assert all(-1.0 <= r.s_asv <= 1.0 for r in records)
        assert all(r.s_sasv is None for r in records)

    def test_cm_score_ignores_claimed_speaker(self):
        asv, cm, enr, head = self._toy()
        trials = [Trial("s1", "t1"), Trial("s2", "t1")]
        r1, r2 = score_all(trials, enr, asv, cm, head)
        assert r1.s_cm == r2.s_cm
        assert r1.s_asv != r2.s_asv

    def test_unknown_speaker(self):
        asv, cm, enr, head = self._toy()
        with pytest.raises(DataError, match="s9"):
            score_all([Trial("s9", "t1")], enr, asv, cm, head)

    def test_unknown_utterance(self):
        asv, cm, enr, head = self._toy()
        with pytest.raises(DataError, match="zz"):
            score_all([Trial("s1", "zz")], enr, asv, cm, head)

    def test_score_mean_aggregation(self):
        asv, cm, enr, head = self._toy()
        enr2 = {"s1": ["e1", "e2"], "s2": ["e2"]}
        trials = [Trial("s1", "t1")]
        emb_mean = score_all(trials, enr2, asv, cm, head)[0].s_asv
        scr_mean = score_all(trials, enr2, asv, cm, head,
                             enroll_agg=SCORE_MEAN)[0].s_asv
        expected = np.mean([cosine_score(asv["e1"], asv["t1"]),
                            cosine_score(asv["e2"], asv["t1"])])
        assert scr_mean == pytest.approx(expected, abs=1e-15)
        assert emb_mean != scr_mean
