"""Fusion of the mapped subsystem scores into one decision score.

The product rule multiplies the countermeasure posterior sigma(s_cm) by
the mapped speaker posterior f(s_asv), yielding a joint score in [0, 1].
Three reference variants are kept for comparison: the raw score sum
(baseline1), the mapped sum, and the raw product.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .data import ScoreRecord
from .mapping import LINEAR, SIGMOID, CalibratorParams, MappingKind, apply_mapping, sigmoid

RAW_SUM = "raw-sum"
MAPPED_SUM = "mapped-sum"
RAW_PRODUCT = "raw-product"


@dataclass(frozen=True)
class ProductRule:
    """Joint posterior score sigma(s_cm) * f(s_asv)."""

    mapping: MappingKind


FusionStrategy = Union[ProductRule, str]

# CLI system names.  The -i/-f suffix records whether the head is the
# pre-trained one or a fine-tuned one; the fusion math is identical.
SYSTEM_NAMES = ("pr-l-i", "pr-s-i", "pr-c-i", "pr-l-f", "pr-s-f",
                "baseline1", "ablation-sum", "ablation-prod")


def strategy_from_name(name: str,
                       calibrator: CalibratorParams | None = None) -> FusionStrategy:
    """Resolve a system name to a strategy, enforcing calibrator rules."""
    if name not in SYSTEM_NAMES:
        raise ValueError(f"unknown system name {name!r}; expected one of {SYSTEM_NAMES}")
    if name == "pr-c-i":
        if calibrator is None:
            raise ValueError("pr-c-i requires a calibrator")
        return ProductRule(mapping=calibrator)
    if calibrator is not None:
        raise ValueError(f"{name} does not take a calibrator")
    if name in ("pr-l-i", "pr-l-f"):
        return ProductRule(mapping=LINEAR)
    if name in ("pr-s-i", "pr-s-f"):
        return ProductRule(mapping=SIGMOID)
    return {"baseline1": RAW_SUM,
            "ablation-sum": MAPPED_SUM,
            "ablation-prod": RAW_PRODUCT}[name]


def fuse(strategy: FusionStrategy, s_asv, s_cm):
    """Combine one (or an array of) score pair(s) into the decision score."""
    if isinstance(strategy, ProductRule):
        return sigmoid(s_cm) * apply_mapping(strategy.mapping, s_asv)
    if strategy == MAPPED_SUM:
        return sigmoid(s_cm) + sigmoid(s_asv)
    if strategy == RAW_PRODUCT:
        return np.multiply(s_cm, s_asv) if not np.isscalar(s_cm) else s_cm * s_asv
    if strategy == RAW_SUM:
        return np.add(s_cm, s_asv) if not np.isscalar(s_cm) else s_cm + s_asv
    raise ValueError(f"unknown fusion strategy {strategy!r}")


def fuse_records(strategy: FusionStrategy,
                 records: Sequence[ScoreRecord]) -> list[ScoreRecord]:
    """Fill s_sasv for every record, preserving order."""
    return [replace(r, s_sasv=float(fuse(strategy, r.s_asv, r.s_cm))) for r in records]
