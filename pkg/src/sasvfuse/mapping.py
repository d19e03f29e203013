"""Mappings from raw subsystem scores to probabilities.

The countermeasure logit always goes through a sigmoid.  The speaker-side
cosine score goes through one of three monotone maps onto [0, 1]: the
linear map (s + 1) / 2, the sigmoid, or a logistic calibrator
sigma(a * s + b) trained on labeled bona fide trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

LINEAR = "linear"
SIGMOID = "sigmoid"


class ConvergenceError(RuntimeError):
    """The calibrator optimizer failed to reach tolerance."""


@dataclass(frozen=True)
class CalibratorParams:
    """Scale and offset of the logistic score calibrator."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("calibrator parameters must be finite")


MappingKind = Union[str, CalibratorParams]


def sigmoid(x):
    """Numerically stable logistic function; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def map_linear(s):
    """(s + 1) / 2, taking [-1, 1] onto [0, 1]."""
    arr = np.asarray(s, dtype=np.float64)
    out = (arr + 1.0) / 2.0
    return float(out) if np.isscalar(s) or arr.ndim == 0 else out


def map_sigmoid(s):
    return sigmoid(s)


def apply_mapping(kind: MappingKind, s):
    """Dispatch a score through the requested monotone map."""
    if kind == LINEAR:
        return map_linear(s)
    if kind == SIGMOID:
        return map_sigmoid(s)
    if isinstance(kind, CalibratorParams):
        return sigmoid(kind.a * np.asarray(s, dtype=np.float64) + kind.b)
    raise ValueError(f"unknown mapping kind {kind!r}")


def calibration_nll(scores, labels, a: float, b: float, l2: float = 0.0) -> float:
    """Mean negative log-likelihood of sigma(a*s + b) plus l2*(a^2+b^2)/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    z = a * s + b
    # -log sigma(z) = log(1 + e^-z); -log(1 - sigma(z)) = log(1 + e^z)
    nll = np.mean(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z))
    return float(nll + 0.5 * l2 * (a * a + b * b))


def fit_calibrator(scores, labels, l2: float = 1e-4,
                   tol: float = 1e-8, max_iter: int = 500) -> CalibratorParams:
    """Fit the two-parameter logistic calibrator by damped Newton descent.

    Minimizes calibration_nll to gradient norm < tol.  Deterministic.
    Falls back to backtracking gradient steps whenever the Newton system
    is ill-conditioned.  Raises ValueError if only one class is present
    and ConvergenceError if the iteration cap is hit (near-separable data
    with l2 = 0 is the typical culprit).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ValueError("scores and labels must be matching nonempty vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("calibration scores must be finite")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise ValueError("calibration needs at least one sample of each class")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")

    a, b = 0.0, 0.0
    obj = calibration_nll(s, y, a, b, l2)
    for _ in range(max_iter):
        z = a * s + b
        p = sigmoid(z)
        r = p - y
        ga = float(np.mean(r * s)) + l2 * a
        gb = float(np.mean(r)) + l2 * b
        if np.hypot(ga, gb) < tol:
            return CalibratorParams(a=a, b=b)

        w = p * (1.0 - p)
        haa = float(np.mean(w * s * s)) + l2
        hab = float(np.mean(w * s))
        hbb = float(np.mean(w)) + l2
        det = haa * hbb - hab * hab
        if det > 1e-300 and np.isfinite(det):
            da = -(hbb * ga - hab * gb) / det
            db = -(haa * gb - hab * ga) / det
        else:
            da, db = -ga, -gb
        slope = da * ga + db * gb
        if slope >= 0.0:  # not a descent direction; fall back to steepest descent
            da, db = -ga, -gb
            slope = -(ga * ga + gb * gb)

        t = 1.0
        for _ in range(80):
            cand = calibration_nll(s, y, a + t * da, b + t * db, l2)
            if cand <= obj + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            raise ConvergenceError("calibrator line search failed")
        a, b = a + t * da, b + t * db
        obj = cand
    raise ConvergenceError(
        f"calibrator did not reach gradient norm {tol} in {max_iter} iterations")
