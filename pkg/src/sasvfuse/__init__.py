"""Probabilistic fusion of speaker-verification and anti-spoofing scores.

A joint decision score accepts a test utterance only when it is both the
claimed speaker and bona fide: the countermeasure logit goes through a
sigmoid, the speaker-side cosine score through a monotone map onto
[0, 1], and the two posteriors multiply.  The package covers raw scoring,
score mapping (including a trained logistic calibrator), fusion variants,
the SV/SPF/SASV equal-error-rate suite, countermeasure-head fine-tuning,
and synthetic worlds plus brute-force oracles for end-to-end checks.
"""

from .data import (DataError, Embedding, EnrollmentMap, FormatError, ScoreRecord,
                   Trial, TrialClass)
from .fusion import (MAPPED_SUM, RAW_PRODUCT, RAW_SUM, SYSTEM_NAMES, FusionStrategy,
                     ProductRule, fuse, fuse_records, strategy_from_name)
from .mapping import (LINEAR, SIGMOID, CalibratorParams, ConvergenceError,
                      MappingKind, apply_mapping, calibration_nll, fit_calibrator,
                      map_linear, map_sigmoid, sigmoid)
from .metrics import EerResult, MetricSuite, compute_eer, evaluate
from .rng import SplitMix64
from .scoring import (EMBEDDING_MEAN, SCORE_MEAN, CmHead, cm_score, cosine_score,
                      enroll_centroid, enrollment_centroids, score_all)
from .synth import World, WorldSpec, gen_world, oracle_calibrator, oracle_eer
from .trainer import (AdamState, DevData, TrainConfig, TrainData, TrainPair,
                      TrainResult, adam_init, adam_step, build_pairs, grad_head,
                      loss_prior_bce, train_finetune)

__version__ = "0.1.0"

__all__ = [
    "DataError", "Embedding", "EnrollmentMap", "FormatError", "ScoreRecord",
    "Trial", "TrialClass",
    "MAPPED_SUM", "RAW_PRODUCT", "RAW_SUM", "SYSTEM_NAMES", "FusionStrategy",
    "ProductRule", "fuse", "fuse_records", "strategy_from_name",
    "LINEAR", "SIGMOID", "CalibratorParams", "ConvergenceError", "MappingKind",
    "apply_mapping", "calibration_nll", "fit_calibrator", "map_linear",
    "map_sigmoid", "sigmoid",
    "EerResult", "MetricSuite", "compute_eer", "evaluate",
    "SplitMix64",
    "EMBEDDING_MEAN", "SCORE_MEAN", "CmHead", "cm_score", "cosine_score",
    "enroll_centroid", "enrollment_centroids", "score_all",
    "World", "WorldSpec", "gen_world", "oracle_calibrator", "oracle_eer",
    "AdamState", "DevData", "TrainConfig", "TrainData", "TrainPair",
    "TrainResult", "adam_init", "adam_step", "build_pairs", "grad_head",
    "loss_prior_bce", "train_finetune",
    "__version__",
]
