"""File formats: embeddings, protocols, enrollment maps, heads, calibrators, scores.

Embedding binary layout: magic ``SASVEMB1`` (8 ASCII bytes), dimension as
u32 LE, record count as u32 LE, then per record a u16 LE id byte length,
the UTF-8 id, and dimension float32 LE values.  A text alternative is
accepted by sniffing the magic: TSV lines ``id<TAB>v1,v2,...``.  Values
are stored at float32 precision and computed on in float64.

Protocol and enrollment files are UTF-8 text, one record per line, with
``#``-prefixed comment lines (and blank lines) skipped.
"""

from __future__ import annotations

import math
import struct
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import Embedding, EnrollmentMap, FormatError, ScoreRecord, Trial, TrialClass
from .mapping import CalibratorParams
from .scoring import CmHead

EMBEDDING_MAGIC = b"SASVEMB1"

_LABEL_ABSENT = "-"


# ---------------------------------------------------------------------------
# embeddings

def write_embeddings(path, embeddings: Mapping[str, Embedding] | Iterable[Embedding],
                     dim: int) -> None:
    """Write embeddings in the binary format (float32 storage)."""
    items = list(embeddings.values()) if isinstance(embeddings, Mapping) \
        else list(embeddings)
    seen = set()
    for e in items:
        if e.dim != dim:
            raise ValueError(f"embedding {e.utt_id!r} has dim {e.dim}, expected {dim}")
        if e.utt_id in seen:
            raise ValueError(f"duplicate embedding id {e.utt_id!r}")
        seen.add(e.utt_id)
    with open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(struct.pack("<II", dim, len(items)))
        for e in items:
            raw = e.utt_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"embedding id too long: {e.utt_id[:32]!r}...")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(np.asarray(e.values, dtype="<f4").tobytes())


def _load_embeddings_binary(path, blob: bytes,
                            expected_dim: int | None) -> dict[str, Embedding]:
    if len(blob) < 16:
        raise FormatError(f"{path}: truncated header")
    dim, count = struct.unpack_from("<II", blob, 8)
    if expected_dim is not None and dim != expected_dim:
        raise FormatError(f"{path}: dimension mismatch: file declares {dim}, "
                          f"expected {expected_dim}")
    if dim == 0:
        raise FormatError(f"{path}: declared dimension is zero")
    out: dict[str, Embedding] = {}
    off = 16
    for i in range(count):
        if off + 2 > len(blob):
            raise FormatError(f"{path}: truncated at record {i}")
        (id_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        end = off + id_len + 4 * dim
        if end > len(blob) or id_len == 0:
            raise FormatError(f"{path}: truncated or empty id at record {i}")
        utt_id = blob[off:off + id_len].decode("utf-8")
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=off + id_len)
        off = end
        if utt_id in out:
            raise FormatError(f"{path}: duplicate embedding id {utt_id!r}")
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{path}: non-finite value in embedding {utt_id!r}")
        out[utt_id] = Embedding(utt_id=utt_id, values=values.astype(np.float64))
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} trailing bytes after "
                          f"{count} declared records")
    return out


def _load_embeddings_tsv(path, text: str,
                         expected_dim: int | None) -> dict[str, Embedding]:
    out: dict[str, Embedding] = {}
    dim = expected_dim
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise FormatError(f"{path}:{lineno}: expected 'id<TAB>comma-separated "
                              f"values' (is this a bad magic string?)")
        utt_id = parts[0]
        try:
            values = np.array([float(tok) for tok in parts[1].split(",")],
                              dtype=np.float32)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: unparseable value ({exc})") from None
        if dim is None:
            dim = values.size
        if values.size != dim:
            raise FormatError(f"{path}:{lineno}: dimension mismatch: row has "
                              f"{values.size} values, expected {dim}")
        if utt_id in out:
            raise FormatError(f"{path}:{lineno}: duplicate embedding id {utt_id!r}")
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{path}:{lineno}: non-finite value in {utt_id!r}")
        out[utt_id] = Embedding(utt_id=utt_id, values=values.astype(np.float64))
    if not out:
        raise FormatError(f"{path}: no embedding records")
    return out


def load_embeddings(path, expected_dim: int | None = None) -> dict[str, Embedding]:
    """Load an embedding file, sniffing binary vs TSV by the magic bytes."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] == EMBEDDING_MAGIC:
        return _load_embeddings_binary(path, blob, expected_dim)
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError(f"{path}: bad magic string (expected "
                          f"{EMBEDDING_MAGIC.decode()}) and not UTF-8 text") from None
    return _load_embeddings_tsv(path, text, expected_dim)


# ---------------------------------------------------------------------------
# protocols and enrollment

def load_protocol(path) -> list[Trial]:
    """Parse trials: ``<speaker> <utt> [<label>]`` with labels target/nontarget/spoof."""
    trials: list[Trial] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) not in (2, 3):
                raise FormatError(f"{path}:{lineno}: expected 2 or 3 fields, "
                                  f"got {len(fields)}")
            trial_class = None
            if len(fields) == 3:
                try:
                    trial_class = TrialClass.from_token(fields[2])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: unknown trial label "
                                      f"{fields[2]!r}") from None
            trials.append(Trial(speaker_id=fields[0], test_utt_id=fields[1],
                                trial_class=trial_class))
    return trials


def write_protocol(path, trials: Sequence[Trial]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in trials:
            if t.trial_class is None:
                f.write(f"{t.speaker_id} {t.test_utt_id}\n")
            else:
                f.write(f"{t.speaker_id} {t.test_utt_id} {t.trial_class.value}\n")


def load_enrollment(path) -> EnrollmentMap:
    """Parse ``<speaker> <utt>`` lines, grouping by first-seen speaker order."""
    mapping: EnrollmentMap = {}
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 fields, "
                                  f"got {len(fields)}")
            spk, utt = fields
            if (spk, utt) in seen:
                raise FormatError(f"{path}:{lineno}: duplicate enrollment entry "
                                  f"{spk} {utt}")
            seen.add((spk, utt))
            mapping.setdefault(spk, []).append(utt)
    if not mapping:
        raise FormatError(f"{path}: empty enrollment file")
    return mapping


def write_enrollment(path, mapping: EnrollmentMap) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for spk, utts in mapping.items():
            for utt in utts:
                f.write(f"{spk} {utt}\n")


# ---------------------------------------------------------------------------
# countermeasure head

def write_cm_head(path, head: CmHead) -> None:
    """Text format: ``dim <n>``, ``bias <float>``, then the weight row."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"dim {head.dim}\n")
        f.write(f"bias {head.bias!r}\n")
        f.write(" ".join(repr(float(w)) for w in head.weights) + "\n")


def load_cm_head(path) -> CmHead:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) < 3:
        raise FormatError(f"{path}: head file needs 3 lines (dim, bias, weights)")
    try:
        if not lines[0].startswith("dim "):
            raise ValueError("first line must be 'dim <n>'")
        dim = int(lines[0].split()[1])
        if not lines[1].startswith("bias "):
            raise ValueError("second line must be 'bias <float>'")
        bias = float(lines[1].split()[1])
        weights = np.array([float(tok) for tok in lines[2].split()], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed head file ({exc})") from None
    if weights.size != dim:
        raise FormatError(f"{path}: head declares dim {dim} but has "
                          f"{weights.size} weights")
    if not (np.all(np.isfinite(weights)) and math.isfinite(bias)):
        raise FormatError(f"{path}: non-finite head parameter")
    return CmHead(weights=weights, bias=bias)


# ---------------------------------------------------------------------------
# calibrator

def write_calibrator(path, params: CalibratorParams) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"a {params.a!r}\n")
        f.write(f"b {params.b!r}\n")


def load_calibrator(path) -> CalibratorParams:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) < 2:
        raise FormatError(f"{path}: calibrator file needs 'a <float>' and "
                          f"'b <float>' lines")
    try:
        if not lines[0].startswith("a ") or not lines[1].startswith("b "):
            raise ValueError("expected 'a <float>' then 'b <float>'")
        a = float(lines[0].split()[1])
        b = float(lines[1].split()[1])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed calibrator file ({exc})") from None
    if not (math.isfinite(a) and math.isfinite(b)):
        raise FormatError(f"{path}: non-finite calibrator parameter")
    return CalibratorParams(a=a, b=b)


# ---------------------------------------------------------------------------
# scores

SCORES_HEADER = "speaker\tutt\ts_asv\ts_cm\ts_sasv\tlabel"


def _fmt(x: float | None) -> str:
    return _LABEL_ABSENT if x is None else format(float(x), ".9g")


def write_scores(path, records: Sequence[ScoreRecord]) -> None:
    """Scores TSV: header then one row per trial, floats at 9 significant digits."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(SCORES_HEADER + "\n")
        for r in records:
            label = _LABEL_ABSENT if r.trial.trial_class is None \
                else r.trial.trial_class.value
            f.write(f"{r.trial.speaker_id}\t{r.trial.test_utt_id}\t"
                    f"{_fmt(r.s_asv)}\t{_fmt(r.s_cm)}\t{_fmt(r.s_sasv)}\t{label}\n")


def load_scores(path) -> list[ScoreRecord]:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != SCORES_HEADER:
        raise FormatError(f"{path}: missing scores header "
                          f"{SCORES_HEADER.replace(chr(9), ' ')!r}")
    records: list[ScoreRecord] = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise FormatError(f"{path}:{lineno}: expected 6 tab-separated fields, "
                              f"got {len(parts)}")
        spk, utt, s_asv, s_cm, s_sasv, label = parts
        try:
            trial_class = None if label == _LABEL_ABSENT \
                else TrialClass.from_token(label)
            records.append(ScoreRecord(
                trial=Trial(speaker_id=spk, test_utt_id=utt, trial_class=trial_class),
                s_asv=float(s_asv),
                s_cm=float(s_cm),
                s_sasv=None if s_sasv == _LABEL_ABSENT else float(s_sasv),
            ))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    return records
