"""Core domain types for spoofing-aware speaker verification trials."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class DataError(Exception):
    """Invalid or inconsistent input data."""


class FormatError(DataError):
    """A file does not conform to its declared format."""


class TrialClass(Enum):
    """Ground-truth class of a test utterance.

    The joint accept/reject label factors into a speaker-side label and a
    bona-fide-side label: target = (1, 1), nontarget = (0, 1), spoof has
    bona-fide label 0.  A spoofed utterance claims the target identity, so
    its speaker-side label is 1; the joint positive flag is target-only
    either way.
    """

    TARGET = "target"
    NONTARGET = "nontarget"
    SPOOF = "spoof"

    @property
    def asv_label(self) -> int:
        return 0 if self is TrialClass.NONTARGET else 1

    @property
    def cm_label(self) -> int:
        return 0 if self is TrialClass.SPOOF else 1

    @property
    def sasv_positive(self) -> bool:
        return self is TrialClass.TARGET

    @property
    def is_bonafide(self) -> bool:
        return self is not TrialClass.SPOOF

    @classmethod
    def from_token(cls, token: str) -> "TrialClass":
        """Parse a protocol label token; exact match only."""
        for member in cls:
            if member.value == token:
                return member
        raise ValueError(f"unknown trial label {token!r}")


@dataclass(frozen=True)
class Embedding:
    """A fixed-dimension utterance embedding."""

    utt_id: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not self.utt_id:
            raise ValueError("embedding id must be nonempty")
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError(f"embedding {self.utt_id!r}: values must be a nonempty vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"embedding {self.utt_id!r} contains a non-finite value")

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Trial:
    """One verification trial: a claimed speaker and a test utterance.

    trial_class is None for unlabeled (inference-only) trials.  A spoof
    trial still names the speaker whose identity the attack claims.
    """

    speaker_id: str
    test_utt_id: str
    trial_class: TrialClass | None = None

    def __post_init__(self):
        if not self.speaker_id:
            raise ValueError("trial speaker_id must be nonempty")
        if not self.test_utt_id:
            raise ValueError("trial test_utt_id must be nonempty")


# speaker_id -> nonempty list of enrollment utterance ids
EnrollmentMap = dict[str, list[str]]


@dataclass(frozen=True)
class ScoreRecord:
    """Per-trial score triple.

    s_asv is a cosine similarity in [-1, 1], s_cm an unbounded logit, and
    s_sasv the fused decision score (None until fusion fills it).
    """

    trial: Trial
    s_asv: float
    s_cm: float
    s_sasv: float | None = None
