"""Synthetic embedding worlds and brute-force verification oracles.

Worlds are a pure, documented function of their spec: every utterance is
drawn from a splitmix64 stream in a fixed order (head direction, speaker
directions, then per speaker the bona fide and spoofed utterances), so a
seed identifies one world exactly.  Speaker-side geometry places each
speaker on a random unit direction with Gaussian within-speaker noise;
spoofed utterances interpolate toward the attacked speaker's direction so
they can deceive the speaker-side score.  Countermeasure embeddings form
two Gaussian clusters aligned with the generated true head so bona fide
and spoof separate by a configurable logit margin, and the evaluation
split's spoof cluster is shifted 30% of the margin toward the bona fide
cluster to make its attacks harder than the ones seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Embedding, EnrollmentMap, Trial, TrialClass
from .metrics import EerResult
from .mapping import CalibratorParams
from .rng import SplitMix64
from .scoring import CmHead

SPLITS = ("train", "dev", "eval")

_EVAL_SPOOF_SHIFT = 0.3  # fraction of the margin the eval spoof cluster moves


@dataclass(frozen=True)
class WorldSpec:
    """Parameters of a synthetic world."""

    seed: int
    n_speakers: int
    utts_per_speaker: int
    spoofs_per_speaker: int
    asv_dim: int = 192
    cm_dim: int = 160
    asv_noise: float = 0.35
    cm_margin: float = 6.0
    spoof_asv_alpha: float = 0.9

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ValueError("need at least 2 speakers")
        if self.utts_per_speaker < 2:
            raise ValueError("need at least 2 utterances per speaker "
                             "(one enrollment, one test)")
        if self.spoofs_per_speaker < 0:
            raise ValueError("spoofs_per_speaker must be nonnegative")
        if self.asv_dim < 1 or self.cm_dim < 1:
            raise ValueError("embedding dimensions must be positive")
        if self.asv_noise <= 0:
            raise ValueError("asv_noise must be positive")
        if self.cm_margin < 0:
            raise ValueError("cm_margin must be nonnegative")
        if not 0.0 <= self.spoof_asv_alpha <= 1.0:
            raise ValueError("spoof_asv_alpha must be in [0, 1]")


@dataclass(frozen=True)
class WorldSplit:
    speakers: list[str]
    enrollment: EnrollmentMap
    trials: list[Trial]
    bonafide_utts: dict[str, list[str]]   # test utterances only
    spoof_utts: dict[str, list[str]]


@dataclass(frozen=True)
class World:
    spec: WorldSpec
    asv_embs: dict[str, Embedding]
    cm_embs: dict[str, Embedding]
    true_head: CmHead
    splits: dict[str, WorldSplit]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def split_speaker_counts(n_speakers: int) -> dict[str, int]:
    """Disjoint speaker split; train keeps the remainder."""
    n_dev = max(1, n_speakers // 4)
    n_eval = max(1, n_speakers // 4)
    return {"train": n_speakers - n_dev - n_eval, "dev": n_dev, "eval": n_eval}


def gen_world(spec: WorldSpec) -> World:
    """Generate a world; bit-identical for equal specs."""
    rng = SplitMix64(spec.seed)
    n_enroll = max(1, min(3, spec.utts_per_speaker // 3))
    n_test = spec.utts_per_speaker - n_enroll

    counts = split_speaker_counts(spec.n_speakers)
    speakers = [f"spk{i:03d}" for i in range(spec.n_speakers)]
    split_of: dict[str, str] = {}
    cursor = 0
    for split in SPLITS:
        for spk in speakers[cursor:cursor + counts[split]]:
            split_of[spk] = split
        cursor += counts[split]

    head_dir = _unit(rng.normals(spec.cm_dim))
    directions = {spk: _unit(rng.normals(spec.asv_dim)) for spk in speakers}
    # asv_noise is the expected norm of the within-speaker perturbation
    # relative to the unit speaker direction, independent of dimension
    noise_scale = spec.asv_noise / np.sqrt(spec.asv_dim)

    bona_center = 0.5 * spec.cm_margin
    spoof_center = {"train": -0.5 * spec.cm_margin,
                    "dev": -0.5 * spec.cm_margin,
                    "eval": (-0.5 + _EVAL_SPOOF_SHIFT) * spec.cm_margin}

    asv_embs: dict[str, Embedding] = {}
    cm_embs: dict[str, Embedding] = {}
    enrollment: dict[str, dict[str, list[str]]] = {s: {} for s in SPLITS}
    bonafide: dict[str, dict[str, list[str]]] = {s: {} for s in SPLITS}
    spoofs: dict[str, dict[str, list[str]]] = {s: {} for s in SPLITS}

    for spk in speakers:
        split = split_of[spk]
        enrollment[split][spk] = []
        bonafide[split][spk] = []
        spoofs[split][spk] = []
        for k in range(spec.utts_per_speaker):
            utt = f"{spk}-e{k}" if k < n_enroll else f"{spk}-b{k - n_enroll}"
            vec = directions[spk] + noise_scale * rng.normals(spec.asv_dim)
            asv_embs[utt] = Embedding(utt_id=utt, values=_unit(vec))
            cm_embs[utt] = Embedding(
                utt_id=utt,
                values=bona_center * head_dir + rng.normals(spec.cm_dim))
            if k < n_enroll:
                enrollment[split][spk].append(utt)
            else:
                bonafide[split][spk].append(utt)
        for k in range(spec.spoofs_per_speaker):
            utt = f"{spk}-s{k}"
            attacker = _unit(rng.normals(spec.asv_dim))
            base = (spec.spoof_asv_alpha * directions[spk]
                    + (1.0 - spec.spoof_asv_alpha) * attacker)
            vec = base + noise_scale * rng.normals(spec.asv_dim)
            asv_embs[utt] = Embedding(utt_id=utt, values=_unit(vec))
            cm_embs[utt] = Embedding(
                utt_id=utt,
                values=spoof_center[split] * head_dir + rng.normals(spec.cm_dim))
            spoofs[split][spk].append(utt)

    splits: dict[str, WorldSplit] = {}
    for split in SPLITS:
        spks = [s for s in speakers if split_of[s] == split]
        trials: list[Trial] = []
        for spk in spks:
            for utt in bonafide[split][spk]:
                trials.append(Trial(spk, utt, TrialClass.TARGET))
        for spk in spks:
            for other in spks:
                if other == spk:
                    continue
                for utt in bonafide[split][other]:
                    trials.append(Trial(spk, utt, TrialClass.NONTARGET))
        for spk in spks:
            for utt in spoofs[split][spk]:
                trials.append(Trial(spk, utt, TrialClass.SPOOF))
        splits[split] = WorldSplit(
            speakers=spks,
            enrollment=enrollment[split],
            trials=trials,
            bonafide_utts=bonafide[split],
            spoof_utts=spoofs[split],
        )

    true_head = CmHead(weights=head_dir, bias=0.0)
    return World(spec=spec, asv_embs=asv_embs, cm_embs=cm_embs,
                 true_head=true_head, splits=splits)


# ---------------------------------------------------------------------------
# brute-force oracles

def oracle_eer(pos, neg) -> EerResult:
    """Exhaustive-threshold EER oracle, O(n^2).

    Counts FRR/FAR by direct comparison at every observed score, every
    midpoint between consecutive observed scores, and the +-inf
    sentinels, then reads the crossing with the same interpolation
    convention as metrics.compute_eer: linearly between the two adjacent
    sweep nodes (observed values and sentinels) bracketing the sign
    change of FAR - FRR.  The midpoints exhaustively confirm the rates
    are constant between observed values.
    """
    p = [float(x) for x in pos]
    n = [float(x) for x in neg]
    if not p or not n:
        raise ValueError("both sides need at least one score")
    if not all(np.isfinite(p)) or not all(np.isfinite(n)):
        raise ValueError("scores must be finite")

    observed = sorted(set(p) | set(n))
    cands: list[tuple[float, bool]] = [(float("-inf"), True)]
    for i, t in enumerate(observed):
        cands.append((t, True))
        if i + 1 < len(observed):
            mid = (t + observed[i + 1]) / 2.0
            if t < mid < observed[i + 1]:
                cands.append((mid, False))
    cands.append((float("inf"), True))

    frr = [sum(1 for x in p if x < t) / len(p) for t, _ in cands]
    far = [sum(1 for x in n if x >= t) / len(n) for t, _ in cands]
    for k, (t, is_node) in enumerate(cands):
        if not is_node and (frr[k], far[k]) != (frr[k + 1], far[k + 1]):
            raise AssertionError("rates changed between observed scores")

    nodes = [k for k, (_, is_node) in enumerate(cands) if is_node]
    hi = next(k for k in nodes if far[k] - frr[k] <= 0.0)
    lo = max(k for k in nodes if k < hi)
    d_lo = far[lo] - frr[lo]
    d_hi = far[hi] - frr[hi]
    lam = d_lo / (d_lo - d_hi)
    eer = frr[lo] + lam * (frr[hi] - frr[lo])
    threshold = cands[lo][0] + lam * (cands[hi][0] - cands[lo][0])
    return EerResult(eer=float(eer), threshold=float(threshold))


_COARSE_A = (0.0, 50.0)
_COARSE_B = (-25.0, 25.0)
_GRID_POINTS = 201


def _grid_nll(scores: np.ndarray, labels: np.ndarray,
              avals: np.ndarray, bvals: np.ndarray, l2: float):
    """Regularized NLL over the (a, b) grid; returns the best point."""
    aa = np.repeat(avals, bvals.size)
    bb = np.tile(bvals, avals.size)
    best_nll = np.inf
    best = (0.0, 0.0)
    chunk = max(1, 4_000_000 // max(1, scores.size))
    for start in range(0, aa.size, chunk):
        a = aa[start:start + chunk]
        b = bb[start:start + chunk]
        z = np.outer(a, scores) + b[:, None]
        # y*log(1+e^-z) + (1-y)*log(1+e^z) == log(1+e^-|z|) + max(z,0) - y*z
        loss = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - labels[None, :] * z
        nll = loss.mean(axis=1) + 0.5 * l2 * (a * a + b * b)
        k = int(np.argmin(nll))
        if nll[k] < best_nll:
            best_nll = float(nll[k])
            best = (float(a[k]), float(b[k]))
    return best, best_nll


def oracle_calibrator(scores, labels, l2: float = 1e-4) -> CalibratorParams:
    """Two-stage grid-search oracle for the logistic calibrator.

    Coarse grid over a in [0, 50], b in [-25, 25] at 201x201 points, then
    a 201x201 grid over +-1 coarse step around the best cell; returns the
    grid minimizer of the same regularized NLL objective that
    fit_calibrator minimizes.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.ndim != 1 or s.size == 0 or s.shape != y.shape:
        raise ValueError("scores and labels must be matching nonempty vectors")
    if y.min() == y.max():
        raise ValueError("calibration needs at least one sample of each class")

    avals = np.linspace(*_COARSE_A, _GRID_POINTS)
    bvals = np.linspace(*_COARSE_B, _GRID_POINTS)
    (a0, b0), _ = _grid_nll(s, y, avals, bvals, l2)

    da = (_COARSE_A[1] - _COARSE_A[0]) / (_GRID_POINTS - 1)
    db = (_COARSE_B[1] - _COARSE_B[0]) / (_GRID_POINTS - 1)
    avals = np.linspace(a0 - da, a0 + da, _GRID_POINTS)
    bvals = np.linspace(b0 - db, b0 + db, _GRID_POINTS)
    (a1, b1), _ = _grid_nll(s, y, avals, bvals, l2)
    return CalibratorParams(a=a1, b=b1)
