"""Equal error rate and the three-way metric suite.

Convention (shared with the brute-force oracle in synth): the decision
rule accepts a trial iff score >= threshold.  FRR(t) is the fraction of
positives strictly below t and FAR(t) the fraction of negatives at or
above t.  Both are step functions that change only at observed score
values, so the sweep evaluates all distinct observed values plus -inf and
+inf sentinels.  FAR - FRR is nonincreasing from +1 to -1 along the
sweep; the EER is read off by linear interpolation between the last sweep
point where FAR - FRR > 0 and the first where it is <= 0, and the
threshold is interpolated between the same two points with the same
weight.  EER is returned as a fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ScoreRecord, TrialClass


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float


@dataclass(frozen=True)
class MetricSuite:
    """The three EERs; a field is None when its classes are absent."""

    sv_eer: EerResult | None
    spf_eer: EerResult | None
    sasv_eer: EerResult | None


def _validate_side(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} scores must be a nonempty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} scores contain a non-finite value")
    return arr


def compute_eer(pos: Sequence[float], neg: Sequence[float]) -> EerResult:
    """EER and crossing threshold under the module convention."""
    p = _validate_side(pos, "positive")
    n = _validate_side(neg, "negative")

    grid = np.concatenate(([-np.inf], np.unique(np.concatenate((p, n))), [np.inf]))
    p_sorted = np.sort(p)
    n_sorted = np.sort(n)
    frr = np.searchsorted(p_sorted, grid, side="left") / p.size
    far = (n.size - np.searchsorted(n_sorted, grid, side="left")) / n.size
    diff = far - frr

    # diff starts at +1 and ends at -1; find the first nonpositive point.
    hi = int(np.argmax(diff <= 0.0))
    lo = hi - 1
    lam = diff[lo] / (diff[lo] - diff[hi])
    eer = float(frr[lo] + lam * (frr[hi] - frr[lo]))
    threshold = float(grid[lo] + lam * (grid[hi] - grid[lo]))
    return EerResult(eer=eer, threshold=threshold)


def _column(records: Sequence[ScoreRecord], column: str) -> np.ndarray:
    vals = []
    for i, r in enumerate(records):
        v = getattr(r, column)
        if v is None:
            raise ValueError(f"record {i} has no {column}; run fusion first")
        vals.append(v)
    return np.asarray(vals, dtype=np.float64)


def evaluate(records: Sequence[ScoreRecord], column: str = "s_sasv") -> MetricSuite:
    """Compute SV, SPF, and SASV EERs over labeled records.

    SV uses target vs nontarget, SPF target vs spoof, SASV target vs the
    union of nontarget and spoof, all on the chosen score column.  A
    metric whose negative class is missing (or with no targets at all) is
    reported as None.
    """
    if column not in ("s_asv", "s_cm", "s_sasv"):
        raise ValueError(f"unknown score column {column!r}")
    for i, r in enumerate(records):
        if r.trial.trial_class is None:
            raise ValueError(f"record {i} is unlabeled; evaluation needs labels")

    scores = _column(records, column)
    classes = np.asarray([r.trial.trial_class.value for r in records])
    tar = scores[classes == TrialClass.TARGET.value]
    non = scores[classes == TrialClass.NONTARGET.value]
    spf = scores[classes == TrialClass.SPOOF.value]

    def _maybe(pos, neg):
        if pos.size == 0 or neg.size == 0:
            return None
        return compute_eer(pos, neg)

    return MetricSuite(
        sv_eer=_maybe(tar, non),
        spf_eer=_maybe(tar, spf),
        sasv_eer=_maybe(tar, np.concatenate((non, spf))),
    )
