"""Raw subsystem scores.

The speaker side scores a test utterance by cosine similarity against an
enrollment centroid; the countermeasure side applies a trainable affine
head to the countermeasure embedding and outputs a logit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import DataError, Embedding, EnrollmentMap, ScoreRecord, Trial

# Aggregation modes for multi-utterance enrollment.
EMBEDDING_MEAN = "embedding-mean"
SCORE_MEAN = "score-mean"

_ZERO_NORM_TOL = 1e-12


@dataclass(frozen=True)
class CmHead:
    """Affine map from a countermeasure embedding to a logit score."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ValueError("head weights must be a nonempty vector")
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("head parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.size


def enroll_centroid(embeddings: Sequence[Embedding]) -> Embedding:
    """Mean of the enrollment embeddings, L2-normalized.

    Raises ValueError on an empty list, mismatched dimensions, or a zero
    mean vector (the direction would be undefined).
    """
    if len(embeddings) == 0:
        raise ValueError("cannot build a centroid from zero embeddings")
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"enrollment embeddings disagree on dimension: {sorted(dims)}")
    mean = np.mean([e.values for e in embeddings], axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < _ZERO_NORM_TOL:
        raise ValueError("enrollment mean is the zero vector; centroid direction undefined")
    ids = ",".join(e.utt_id for e in embeddings[:3])
    return Embedding(utt_id=f"centroid({ids}{'...' if len(embeddings) > 3 else ''})",
                     values=mean / norm)


def cosine_score(enroll: Embedding, test: Embedding) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding spill."""
    if enroll.dim != test.dim:
        raise ValueError(f"dimension mismatch: {enroll.dim} vs {test.dim}")
    ne = float(np.linalg.norm(enroll.values))
    nt = float(np.linalg.norm(test.values))
    if ne < _ZERO_NORM_TOL or nt < _ZERO_NORM_TOL:
        raise ValueError("cosine similarity undefined for a zero-norm embedding")
    c = float(np.dot(enroll.values, test.values) / (ne * nt))
    return min(1.0, max(-1.0, c))


def cm_score(head: CmHead, x_cm: Embedding) -> float:
    """Countermeasure logit: dot(weights, x) + bias."""
    if head.dim != x_cm.dim:
        raise ValueError(
            f"head dimension {head.dim} does not match embedding {x_cm.utt_id!r} "
            f"dimension {x_cm.dim}")
    return float(np.dot(head.weights, x_cm.values) + head.bias)


def enrollment_centroids(enrollment: EnrollmentMap,
                         asv_embs: Mapping[str, Embedding]) -> dict[str, Embedding]:
    """Resolve and average each speaker's enrollment utterances."""
    centroids = {}
    for spk, utts in enrollment.items():
        missing = [u for u in utts if u not in asv_embs]
        if missing:
            raise DataError(f"speaker {spk!r}: enrollment utterance {missing[0]!r} "
                            f"has no speaker embedding")
        centroids[spk] = enroll_centroid([asv_embs[u] for u in utts])
    return centroids


def score_all(trials: Sequence[Trial],
              enrollment: EnrollmentMap,
              asv_embs: Mapping[str, Embedding],
              cm_embs: Mapping[str, Embedding],
              head: CmHead,
              enroll_agg: str = EMBEDDING_MEAN) -> list[ScoreRecord]:
    """Score every trial, in input order, leaving s_sasv unset.

    enroll_agg selects how multiple enrollment utterances combine:
    "embedding-mean" (default) scores against the normalized mean
    embedding; "score-mean" averages per-utterance cosine scores.
    """
    if enroll_agg not in (EMBEDDING_MEAN, SCORE_MEAN):
        raise ValueError(f"unknown enrollment aggregation {enroll_agg!r}")
    if enroll_agg == EMBEDDING_MEAN:
        centroids = enrollment_centroids(enrollment, asv_embs)
    else:
        enroll_embs = {}
        for spk, utts in enrollment.items():
            missing = [u for u in utts if u not in asv_embs]
            if missing:
                raise DataError(f"speaker {spk!r}: enrollment utterance {missing[0]!r} "
                                f"has no speaker embedding")
            enroll_embs[spk] = [asv_embs[u] for u in utts]

    records = []
    for i, trial in enumerate(trials):
        if trial.speaker_id not in enrollment:
            raise DataError(f"trial {i}: speaker {trial.speaker_id!r} has no enrollment")
        if trial.test_utt_id not in asv_embs:
            raise DataError(f"trial {i}: test utterance {trial.test_utt_id!r} "
                            f"has no speaker embedding")
        if trial.test_utt_id not in cm_embs:
            raise DataError(f"trial {i}: test utterance {trial.test_utt_id!r} "
                            f"has no countermeasure embedding")
        test_asv = asv_embs[trial.test_utt_id]
        if enroll_agg == EMBEDDING_MEAN:
            s_asv = cosine_score(centroids[trial.speaker_id], test_asv)
        else:
            scores = [cosine_score(e, test_asv) for e in enroll_embs[trial.speaker_id]]
            s_asv = float(np.mean(scores))
        s_cm = cm_score(head, cm_embs[trial.test_utt_id])
        records.append(ScoreRecord(trial=trial, s_asv=s_asv, s_cm=s_cm))
    return records
