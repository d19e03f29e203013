import struct

import numpy as np
import pytest

from sasvfuse import formats
from sasvfuse.data import Embedding, FormatError, Trial, TrialClass
from sasvfuse.mapping import CalibratorParams
from sasvfuse.scoring import CmHead


def _emb(utt_id, values):
    return Embedding(utt_id, np.asarray(values, dtype=np.float64))


class TestEmbeddingsBinary:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "e.emb"
        vals = {
            "a": _emb("a", [1.0, 2.5, -3.25]),
            "b": _emb("b", [0.1, 0.2, 0.3]),
        }
        formats.write_embeddings(path, vals, 3)
        out = formats.load_embeddings(path, expected_dim=3)
        assert len(out) == 2
        for k, e in vals.items():
            stored = e.values.astype(np.float32).astype(np.float64)
            assert np.array_equal(out[k].values, stored)

    def test_round_trip_is_stable(self, tmp_path):
        # float32 storage: a second write/load cycle is bit-exact
        p1, p2 = tmp_path / "a.emb", tmp_path / "b.emb"
        rng = np.random.default_rng(0)
        embs = {f"u{i}": _emb(f"u{i}", rng.normal(size=8)) for i in range(5)}
        formats.write_embeddings(p1, embs, 8)
        once = formats.load_embeddings(p1)
        formats.write_embeddings(p2, once, 8)
        twice = formats.load_embeddings(p2)
        assert p1.read_bytes()[16:] == p2.read_bytes()[16:]
        for k in once:
            assert np.array_equal(once[k].values, twice[k].values)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "e.emb"
        formats.write_embeddings(path, {"a": _emb("a", np.zeros(192))}, 192)
        with pytest.raises(FormatError, match="dimension mismatch"):
            formats.load_embeddings(path, expected_dim=160)

    def test_nan_value_rejected(self, tmp_path):
        path = tmp_path / "e.emb"
        blob = formats.EMBEDDING_MAGIC + struct.pack("<II", 2, 1)
        blob += struct.pack("<H", 1) + b"x"
        blob += np.array([1.0, np.nan], dtype="<f4").tobytes()
        path.write_bytes(blob)
        with pytest.raises(FormatError, match="non-finite"):
            formats.load_embeddings(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "e.emb"
        rec = struct.pack("<H", 1) + b"x" + np.zeros(2, dtype="<f4").tobytes()
        path.write_bytes(formats.EMBEDDING_MAGIC + struct.pack("<II", 2, 2) + rec + rec)
        with pytest.raises(FormatError, match="duplicate"):
            formats.load_embeddings(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "e.emb"
        formats.write_embeddings(path, {"ab": _emb("ab", [1.0, 2.0])}, 2)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError, match="truncated"):
            formats.load_embeddings(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "e.emb"
        formats.write_embeddings(path, {"ab": _emb("ab", [1.0, 2.0])}, 2)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(FormatError, match="trailing"):
            formats.load_embeddings(path)

    def test_bad_magic_binary_garbage(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_bytes(b"\xff\xfe" + bytes(range(200)))
        with pytest.raises(FormatError, match="bad magic"):
            formats.load_embeddings(path)


class TestEmbeddingsTsv:
    def test_tsv_accepted_by_sniffing(self, tmp_path):
        path = tmp_path / "e.tsv"
        path.write_text("a\t1.5,2.5\nb\t-1,0.25\n")
        out = formats.load_embeddings(path, expected_dim=2)
        assert set(out) == {"a", "b"}
        assert np.array_equal(out["a"].values, [1.5, 2.5])

    def test_tsv_dimension_enforced(self, tmp_path):
        path = tmp_path / "e.tsv"
        path.write_text("a\t1,2\nb\t1,2,3\n")
        with pytest.raises(FormatError, match="dimension mismatch"):
            formats.load_embeddings(path)

    def test_text_that_is_not_tsv(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("hello world\n")
        with pytest.raises(FormatError):
            formats.load_embeddings(path)


class TestProtocol:
    def test_parse(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("# comment\nspk1 utt9 target\n\nspk2 utt3 spoof\nspk1 utt4\n")
        trials = formats.load_protocol(path)
        assert trials[0] == Trial("spk1", "utt9", TrialClass.TARGET)
        assert trials[1] == Trial("spk2", "utt3", TrialClass.SPOOF)
        assert trials[2].trial_class is None
        assert len(trials) == 3

    def test_unknown_label(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("spk1 utt9 bonafide\n")
        with pytest.raises(FormatError, match="unknown trial label"):
            formats.load_protocol(path)

    def test_field_count(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("spk1\n")
        with pytest.raises(FormatError, match="expected 2 or 3 fields"):
            formats.load_protocol(path)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "p.txt"
        trials = [Trial("s1", "u1", TrialClass.TARGET), Trial("s2", "u2")]
        formats.write_protocol(path, trials)
        assert formats.load_protocol(path) == trials


class TestEnrollment:
    def test_grouping_preserves_order(self, tmp_path):
        path = tmp_path / "en.txt"
        path.write_text("s1 a\ns1 b\ns2 c\n")
        assert formats.load_enrollment(path) == {"s1": ["a", "b"], "s2": ["c"]}

    def test_duplicate_entry(self, tmp_path):
        path = tmp_path / "en.txt"
        path.write_text("s1 a\ns1 a\n")
        with pytest.raises(FormatError, match="duplicate"):
            formats.load_enrollment(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "en.txt"
        path.write_text("# nothing\n")
        with pytest.raises(FormatError, match="empty"):
            formats.load_enrollment(path)


class TestHeadAndCalibrator:
    def test_head_round_trip(self, tmp_path):
        path = tmp_path / "head.txt"
        head = CmHead(weights=np.array([0.5, -1.25, 1e-17]), bias=-0.125)
        formats.write_cm_head(path, head)
        out = formats.load_cm_head(path)
        assert np.array_equal(out.weights, head.weights)
        assert out.bias == head.bias

    def test_head_dim_mismatch(self, tmp_path):
        path = tmp_path / "head.txt"
        path.write_text("dim 3\nbias 0.0\n1.0 2.0\n")
        with pytest.raises(FormatError, match="dim 3"):
            formats.load_cm_head(path)

    def test_head_malformed(self, tmp_path):
        path = tmp_path / "head.txt"
        path.write_text("weights first\nbias 0\n1.0\n")
        with pytest.raises(FormatError):
            formats.load_cm_head(path)

    def test_calibrator_round_trip(self, tmp_path):
        path = tmp_path / "cal.txt"
        formats.write_calibrator(path, CalibratorParams(a=3.25, b=-0.5))
        out = formats.load_calibrator(path)
        assert (out.a, out.b) == (3.25, -0.5)


class TestScores:
    def test_round_trip_with_absent_fields(self, tmp_path):
        from sasvfuse.data import ScoreRecord
        path = tmp_path / "s.tsv"
        recs = [
            ScoreRecord(Trial("s1", "u1", TrialClass.TARGET),
                        s_asv=0.123456789123, s_cm=2.0, s_sasv=0.704637662),
            ScoreRecord(Trial("s2", "u2"), s_asv=-0.5, s_cm=-3.0, s_sasv=None),
        ]
        formats.write_scores(path, recs)
        text = path.read_text().splitlines()
        assert text[0] == formats.SCORES_HEADER
        assert text[1].split("\t")[2] == "0.123456789"  # 9 significant digits
        assert text[2].endswith("-\t-")
        out = formats.load_scores(path)
        assert out[0].trial == recs[0].trial
        assert out[1].s_sasv is None
        assert out[1].trial.trial_class is None

    def test_header_required(self, tmp_path):
        path = tmp_path / "s.tsv"
        path.write_text("nope\n")
        with pytest.raises(FormatError, match="header"):
            formats.load_scores(path)
