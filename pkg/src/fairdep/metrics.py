"""Interview-level scoring: F1 breakdowns and fairness estimators.

Segment probabilities are reduced to one score per interview (mean,
threshold 0.5, ties positive). F1 follows 2PR/(P+R) with the 0/0 case
defined as 0. Fairness diagnostics are the empirical statistical
parity difference and a binned sufficiency gap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from fairdep.dataset import GENDERS
from fairdep.errors import ConfigError, DataError

DECISION_THRESHOLD = 0.5
SUFFICIENCY_BINS = 10
ROW_ALL = "All"


@dataclass(frozen=True)
class InterviewPrediction:
    """One scored interview: ground truth plus aggregated model output."""

    participant_id: int
    gender: str
    y_true: int
    score: float
    y_pred: int

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise DataError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        if self.y_true not in (0, 1) or self.y_pred not in (0, 1):
            raise DataError("labels must be 0 or 1")
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"score must lie in [0, 1], got {self.score}")


def aggregate_interview(segment_probs) -> tuple[float, int]:
    """Mean segment probability and thresholded decision (ties -> 1)."""
    probs = np.asarray(segment_probs, dtype=np.float64)
    if probs.size == 0:
        raise DataError("cannot aggregate an interview with no segments")
    score = float(np.mean(probs))
    return score, int(score >= DECISION_THRESHOLD)


def f1(predictions: list[InterviewPrediction], positive_class: int) -> float:
    """F1 of one class over interview predictions; 0 when P+R is 0."""
    if not predictions:
        raise DataError("f1 needs at least one prediction")
    y_true = np.array([p.y_true for p in predictions])
    y_pred = np.array([p.y_pred for p in predictions])
    tp = int(np.sum((y_pred == positive_class) & (y_true == positive_class)))
    fp = int(np.sum((y_pred == positive_class) & (y_true != positive_class)))
    fn = int(np.sum((y_pred != positive_class) & (y_true == positive_class)))
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def macro_f1(predictions: list[InterviewPrediction]) -> float:
    return (f1(predictions, 0) + f1(predictions, 1)) / 2.0


@dataclass(frozen=True)
class F1Row:
    f1_nd: float
    f1_d: float

    @property
    def f1_avg(self) -> float:
        return (self.f1_nd + self.f1_d) / 2.0


@dataclass(frozen=True)
class F1Breakdown:
    """Per-gender and overall F1 rows. rows keys are a subset of
    {"F", "M", "All"}; a gender with no interviews is omitted."""

    rows: dict[str, F1Row]

    @property
    def f1_total_avg(self) -> float:
        return self.rows[ROW_ALL].f1_avg


def breakdown(predictions: list[InterviewPrediction]) -> F1Breakdown:
    if not predictions:
        raise DataError("breakdown needs at least one prediction")
    rows: dict[str, F1Row] = {}
    for gender in GENDERS:
        subset = [p for p in predictions if p.gender == gender]
        if not subset:
            warnings.warn(f"no interviews for gender {gender}; row omitted")
            continue
        rows[gender] = F1Row(f1_nd=f1(subset, 0), f1_d=f1(subset, 1))
    rows[ROW_ALL] = F1Row(f1_nd=f1(predictions, 0), f1_d=f1(predictions, 1))
    return F1Breakdown(rows=rows)


def relative_difference(f1_unbalanced: float, f1_balanced: float) -> float:
    """Percent change of the balanced value against the unbalanced one."""
    if f1_unbalanced == 0:
        raise ConfigError("relative difference is undefined for a zero baseline")
    return 100.0 * (f1_balanced - f1_unbalanced) / f1_unbalanced


def _split_by_gender(predictions):
    by_gender = {g: [p for p in predictions if p.gender == g] for g in GENDERS}
    missing = [g for g, ps in by_gender.items() if not ps]
    if missing:
        raise DataError(f"both genders required, missing: {missing}")
    return by_gender


def statistical_parity_difference(predictions: list[InterviewPrediction]) -> float:
    """P[Y_hat = 1 | F] - P[Y_hat = 1 | M], empirical."""
    by_gender = _split_by_gender(predictions)
    rates = {
        g: float(np.mean([p.y_pred for p in ps])) for g, ps in by_gender.items()
    }
    return rates["F"] - rates["M"]


def sufficiency_gap(
    predictions: list[InterviewPrediction], bins: int = SUFFICIENCY_BINS
) -> float:
    """Max over co-populated equal-width score bins of the gender gap in
    P[Y = 1 | bin]. 0 (with a warning) when no bin holds both genders."""
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    by_gender = _split_by_gender(predictions)

    def bin_index(score: float) -> int:
        return min(int(score * bins), bins - 1)

    rates: dict[str, dict[int, float]] = {}
    for g, ps in by_gender.items():
        per_bin: dict[int, list[int]] = {}
        for p in ps:
            per_bin.setdefault(bin_index(p.score), []).append(p.y_true)
        rates[g] = {b: float(np.mean(ys)) for b, ys in per_bin.items()}

    shared = sorted(set(rates["F"]) & set(rates["M"]))
    if not shared:
        warnings.warn("no score bin holds both genders; sufficiency gap is 0")
        return 0.0
    return max(abs(rates["F"][b] - rates["M"][b]) for b in shared)


__all__ = [
    "DECISION_THRESHOLD",
    "SUFFICIENCY_BINS",
    "InterviewPrediction",
    "F1Row",
    "F1Breakdown",
    "aggregate_interview",
    "f1",
    "macro_f1",
    "breakdown",
    "relative_difference",
    "statistical_parity_difference",
    "sufficiency_gap",
]
