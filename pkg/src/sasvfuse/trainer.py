"""Fine-tuning of the countermeasure head against the fused objective.

Only the affine head moves; the speaker-side score of every pair is fixed,
so the chain factor d(fused)/d(logit) = f(s_asv) * sigmoid'(s_cm) weights
each sample by how closely it resembles the claimed speaker.  Training
minimizes a prior-weighted binary cross-entropy on the fused score with
per-class means, runs Adam over shuffled 1:1:1 target/nontarget/spoof
pairs resampled every epoch, and keeps the head snapshot with the lowest
development SASV-EER (the untrained head competes as epoch 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Embedding, EnrollmentMap, Trial, TrialClass
from .mapping import LINEAR, SIGMOID, apply_mapping, sigmoid
from .metrics import MetricSuite, compute_eer
from .rng import SplitMix64
from .scoring import CmHead, cosine_score, enrollment_centroids

_CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0003
    batch_size: int = 1024
    epochs: int = 200
    target_prior: float = 0.1
    seed: int = 0
    mapping: str = SIGMOID
    pairs_per_epoch: int = 4096
    pair_mix: tuple[int, int, int] = (1, 1, 1)  # target : nontarget : spoof
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.mapping not in (LINEAR, SIGMOID):
            raise ValueError("fine-tuning supports only the linear and sigmoid "
                             "mappings; the calibrated mapping is excluded")
        if not 0.0 < self.target_prior < 1.0:
            raise ValueError("target_prior must be in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.pairs_per_epoch < 1:
            raise ValueError("invalid batch/epoch configuration")
        if len(self.pair_mix) != 3 or any(w < 0 for w in self.pair_mix) \
                or sum(self.pair_mix) == 0:
            raise ValueError("pair_mix needs three nonnegative weights, not all zero")


@dataclass(frozen=True)
class TrainPair:
    """One training pair: claimed-speaker centroid vs a test utterance."""

    enroll_centroid: np.ndarray
    test_asv: np.ndarray
    test_cm: np.ndarray
    label: int  # 1 for target, 0 for nontarget and spoof


@dataclass(frozen=True)
class TrainData:
    """Training world: per-speaker pools plus the embedding tables."""

    enrollment: EnrollmentMap
    bonafide_utts: dict[str, list[str]]
    spoof_utts: dict[str, list[str]]
    asv_embs: Mapping[str, Embedding]
    cm_embs: Mapping[str, Embedding]


@dataclass(frozen=True)
class DevData:
    """Held-out trials scored after every epoch."""

    trials: Sequence[Trial]
    enrollment: EnrollmentMap
    asv_embs: Mapping[str, Embedding]
    cm_embs: Mapping[str, Embedding]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    suite: MetricSuite
    loss: float  # mean batch loss; nan for the untrained epoch-0 row


@dataclass(frozen=True)
class TrainResult:
    head: CmHead
    history: list[EpochRecord]
    best_epoch: int


def _allocate(n_pairs: int, mix: tuple[int, int, int]) -> list[int]:
    """Split n_pairs across classes per mix weights, largest shares first."""
    total = sum(mix)
    counts = [n_pairs * w // total for w in mix]
    for i in range(3):
        if sum(counts) == n_pairs:
            break
        if mix[i] > 0:
            counts[i] += 1
    return counts


def build_pairs(rng: SplitMix64,
                centroids: Mapping[str, np.ndarray],
                bonafide_utts: Mapping[str, Sequence[str]],
                spoof_utts: Mapping[str, Sequence[str]],
                asv_embs: Mapping[str, Embedding],
                cm_embs: Mapping[str, Embedding],
                n_pairs: int,
                mix: tuple[int, int, int] = (1, 1, 1)) -> list[TrainPair]:
    """Sample pairs with the requested class mix, then shuffle.

    A target pair matches a speaker with one of their own bona fide
    utterances; a nontarget pair claims a different speaker; a spoof pair
    uses an attack aimed at the claimed speaker.
    """
    speakers = list(centroids)
    n_target, n_nontarget, n_spoof = _allocate(n_pairs, mix)
    if n_nontarget > 0 and len(speakers) < 2:
        raise ValueError("nontarget pairs need at least two speakers")

    def _pair(claimed: str, utt: str, label: int) -> TrainPair:
        return TrainPair(enroll_centroid=centroids[claimed],
                         test_asv=asv_embs[utt].values,
                         test_cm=cm_embs[utt].values,
                         label=label)

    pairs: list[TrainPair] = []
    for _ in range(n_target):
        spk = rng.choice(speakers)
        pool = bonafide_utts.get(spk) or []
        if not pool:
            raise ValueError(f"speaker {spk!r} has no bona fide utterances")
        pairs.append(_pair(spk, rng.choice(pool), 1))
    for _ in range(n_nontarget):
        spk = rng.choice(speakers)
        others = [s for s in speakers if s != spk]
        other = rng.choice(others)
        pool = bonafide_utts.get(other) or []
        if not pool:
            raise ValueError(f"speaker {other!r} has no bona fide utterances")
        pairs.append(_pair(spk, rng.choice(pool), 0))
    for _ in range(n_spoof):
        spk = rng.choice(speakers)
        pool = spoof_utts.get(spk) or []
        if not pool:
            raise ValueError(f"speaker {spk!r} has no spoofed utterances")
        pairs.append(_pair(spk, rng.choice(pool), 0))
    rng.shuffle(pairs)
    return pairs


def loss_prior_bce(s_sasv, labels, prior: float) -> float:
    """Prior-weighted BCE with per-class means.

    prior * E_pos[-log s] + (1 - prior) * E_neg[-log(1 - s)], with scores
    clamped to [1e-12, 1 - 1e-12]; an absent class contributes zero.
    """
    s = np.clip(np.asarray(s_sasv, dtype=np.float64), _CLAMP, 1.0 - _CLAMP)
    y = np.asarray(labels)
    pos = y == 1
    neg = ~pos
    loss = 0.0
    if pos.any():
        loss += prior * float(np.mean(-np.log(s[pos])))
    if neg.any():
        loss += (1.0 - prior) * float(np.mean(-np.log1p(-s[neg])))
    return loss


def _forward_backward(weights: np.ndarray, bias: float,
                      x_cm: np.ndarray, f_asv: np.ndarray, labels: np.ndarray,
                      prior: float) -> tuple[np.ndarray, float, float]:
    """Loss and its analytic gradient for one batch (arrays).

    Samples whose fused score sits in the clamped region have locally flat
    loss and contribute zero gradient, consistent with loss_prior_bce.
    """
    c = x_cm @ weights + bias
    p = sigmoid(c)
    s_raw = p * f_asv
    s = np.clip(s_raw, _CLAMP, 1.0 - _CLAMP)
    pos = labels == 1
    neg = ~pos
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())

    loss = 0.0
    if n_pos:
        loss += prior * float(np.mean(-np.log(s[pos])))
    if n_neg:
        loss += (1.0 - prior) * float(np.mean(-np.log1p(-s[neg])))

    live = (s_raw > _CLAMP) & (s_raw < 1.0 - _CLAMP)
    g = np.zeros_like(c)
    if n_pos:
        m = pos & live
        # d/dc of -log(p(c) f) is -(1 - p); the mapped speaker factor cancels
        g[m] = -(prior / n_pos) * (1.0 - p[m])
    if n_neg:
        m = neg & live
        g[m] = ((1.0 - prior) / n_neg) * f_asv[m] * p[m] * (1.0 - p[m]) / (1.0 - s[m])
    return x_cm.T @ g, float(np.sum(g)), loss


def grad_head(head: CmHead, batch: Sequence[TrainPair], prior: float,
              mapping: str) -> tuple[np.ndarray, float, float]:
    """Analytic (d_weights, d_bias, loss) of the fused BCE over a batch."""
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    x_cm = np.stack([p.test_cm for p in batch])
    f_asv = np.array([
        apply_mapping(mapping, cosine_score(
            Embedding("enroll", p.enroll_centroid), Embedding("test", p.test_asv)))
        for p in batch])
    labels = np.array([p.label for p in batch])
    return _forward_backward(head.weights, head.bias, x_cm, f_asv, labels, prior)


@dataclass
class AdamState:
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]


def adam_init(params: Sequence[np.ndarray]) -> AdamState:
    return AdamState(step=0,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: Sequence[np.ndarray],
              grads: Sequence[np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[AdamState, list[np.ndarray]]:
    """One bias-corrected Adam update; returns new state and parameters."""
    t = state.step + 1
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m1 = beta1 * m + (1.0 - beta1) * g
        v1 = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m1 / (1.0 - beta1 ** t)
        v_hat = v1 / (1.0 - beta2 ** t)
        new_m.append(m1)
        new_v.append(v1)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return AdamState(step=t, m=new_m, v=new_v), new_p


def _dev_suite(weights: np.ndarray, bias: float,
               x_dev: np.ndarray, f_dev: np.ndarray,
               classes: np.ndarray) -> MetricSuite:
    s_cm = x_dev @ weights + bias
    s_sasv = sigmoid(s_cm) * f_dev
    tar = s_sasv[classes == 0]
    non = s_sasv[classes == 1]
    spf = s_sasv[classes == 2]

    def _maybe(pos, neg):
        return compute_eer(pos, neg) if pos.size and neg.size else None

    return MetricSuite(sv_eer=_maybe(tar, non),
                       spf_eer=_maybe(tar, spf),
                       sasv_eer=_maybe(tar, np.concatenate((non, spf))))


_CLASS_CODE = {TrialClass.TARGET: 0, TrialClass.NONTARGET: 1, TrialClass.SPOOF: 2}


def train_finetune(config: TrainConfig, train: TrainData, dev: DevData,
                   initial_head: CmHead) -> TrainResult:
    """Fine-tune the head; returns the snapshot with minimal dev SASV-EER.

    Deterministic for a fixed config: pair sampling comes from a
    splitmix64 stream seeded by config.seed and batches are reduced in a
    fixed order.  Epoch 0 (the initial head) is part of the selection, so
    the result is never worse on dev than the head it started from.
    """
    centroids = {spk: emb.values for spk, emb in
                 enrollment_centroids(train.enrollment, train.asv_embs).items()}

    dev_centroids = enrollment_centroids(dev.enrollment, dev.asv_embs)
    f_dev, x_dev, classes = [], [], []
    for i, t in enumerate(dev.trials):
        if t.trial_class is None:
            raise ValueError(f"dev trial {i} is unlabeled")
        if t.speaker_id not in dev_centroids:
            raise ValueError(f"dev trial {i}: speaker {t.speaker_id!r} not enrolled")
        s_asv = cosine_score(dev_centroids[t.speaker_id], dev.asv_embs[t.test_utt_id])
        f_dev.append(apply_mapping(config.mapping, s_asv))
        x_dev.append(dev.cm_embs[t.test_utt_id].values)
        classes.append(_CLASS_CODE[t.trial_class])
    f_dev = np.asarray(f_dev)
    x_dev = np.stack(x_dev) if x_dev else np.zeros((0, 1))
    classes = np.asarray(classes)
    if not ((classes == 0).any() and ((classes == 1).any() or (classes == 2).any())):
        raise ValueError("dev trials must include targets and at least one "
                         "negative class for best-epoch selection")

    return _run_training(config, train, centroids, x_dev, f_dev, classes,
                         initial_head)


def _run_training(config, train, centroids, x_dev, f_dev, classes,
                  initial_head) -> TrainResult:
    weights = initial_head.weights.copy()
    bias = np.array([initial_head.bias], dtype=np.float64)

    suite0 = _dev_suite(weights, float(bias[0]), x_dev, f_dev, classes)
    history = [EpochRecord(epoch=0, suite=suite0, loss=float("nan"))]
    best_eer = suite0.sasv_eer.eer
    best_epoch = 0
    best_params = (weights.copy(), float(bias[0]))

    rng = SplitMix64(config.seed)
    state = adam_init([weights, bias])
    for epoch in range(1, config.epochs + 1):
        pairs = build_pairs(rng, centroids, train.bonafide_utts, train.spoof_utts,
                            train.asv_embs, train.cm_embs,
                            config.pairs_per_epoch, config.pair_mix)
        x_cm = np.stack([p.test_cm for p in pairs])
        enroll_mat = np.stack([p.enroll_centroid for p in pairs])
        test_mat = np.stack([p.test_asv for p in pairs])
        cos = np.sum(enroll_mat * test_mat, axis=1) / (
            np.linalg.norm(enroll_mat, axis=1) * np.linalg.norm(test_mat, axis=1))
        f_asv = apply_mapping(config.mapping, np.clip(cos, -1.0, 1.0))
        labels = np.array([p.label for p in pairs])

        losses = []
        for start in range(0, len(pairs), config.batch_size):
            sl = slice(start, start + config.batch_size)
            d_w, d_b, loss = _forward_backward(
                weights, float(bias[0]), x_cm[sl], f_asv[sl], labels[sl],
                config.target_prior)
            state, (weights, bias) = adam_step(
                state, [weights, bias], [d_w, np.array([d_b])],
                config.learning_rate, config.adam_beta1, config.adam_beta2,
                config.adam_eps)
            losses.append(loss)

        suite = _dev_suite(weights, float(bias[0]), x_dev, f_dev, classes)
        history.append(EpochRecord(epoch=epoch, suite=suite,
                                   loss=float(np.mean(losses))))
        if suite.sasv_eer.eer < best_eer:
            best_eer = suite.sasv_eer.eer
            best_epoch = epoch
            best_params = (weights.copy(), float(bias[0]))

    best = CmHead(weights=best_params[0], bias=best_params[1])
    return TrainResult(head=best, history=history, best_epoch=best_epoch)
