"""Classification metrics: confusion matrix, one-vs-rest reductions,
macro / weighted averages, and ranking curves.

Per-class metrics treat each class as a binary problem (that class
against everything else). Any metric whose denominator is zero reports
0.0 and the class records which metrics degenerated, so reports can
footnote them instead of hiding them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np


def round_half_up(value: float, decimals: int = 2) -> float:
    """Decimal rounding with ties away from zero, e.g. 0.925 -> 0.93."""
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int],
                     num_classes: int) -> np.ndarray:
    """Counts with true class on rows, predicted class on columns."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise ValueError("y_true and y_pred must be equal-length 1-D sequences")
    if yt.size == 0:
        raise ValueError("cannot build a confusion matrix from zero samples")
    for name, arr in (("y_true", yt), ("y_pred", yp)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError(f"{name} contains labels outside 0..{num_classes - 1}")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (yt, yp), 1)
    return cm


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def support(self) -> int:
        return self.tp + self.fn


def per_class_counts(cm: np.ndarray, class_index: int) -> BinaryCounts:
    tp = int(cm[class_index, class_index])
    fn = int(cm[class_index].sum() - tp)
    fp = int(cm[:, class_index].sum() - tp)
    tn = int(cm.sum() - tp - fn - fp)
    return BinaryCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    support: int
    degenerate: frozenset[str]  # metric names whose denominator was zero


def binary_metrics(counts: BinaryCounts) -> ClassMetrics:
    accuracy, acc_flag = _ratio(counts.tp + counts.tn, counts.total)
    precision, p_flag = _ratio(counts.tp, counts.tp + counts.fp)
    recall, r_flag = _ratio(counts.tp, counts.tp + counts.fn)
    specificity, s_flag = _ratio(counts.tn, counts.tn + counts.fp)
    if precision + recall > 0:
        f1, f_flag = 2 * precision * recall / (precision + recall), False
    else:
        f1, f_flag = 0.0, True
    degenerate = {name for name, flag in (("accuracy", acc_flag),
                                          ("precision", p_flag),
                                          ("recall", r_flag),
                                          ("specificity", s_flag),
                                          ("f1", f_flag)) if flag}
    return ClassMetrics(accuracy=accuracy, precision=precision, recall=recall,
                        specificity=specificity, f1=f1, support=counts.support,
                        degenerate=frozenset(degenerate))


def per_class_metrics(cm: np.ndarray) -> list[ClassMetrics]:
    return [binary_metrics(per_class_counts(cm, c)) for c in range(cm.shape[0])]


def overall_accuracy(cm: np.ndarray) -> float:
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm)) / total


@dataclass(frozen=True)
class AveragedMetrics:
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


def averaged_metrics(per_class: Sequence[ClassMetrics],
                     supports: Sequence[int] | None = None) -> AveragedMetrics:
    """Macro (plain mean) and support-weighted averages of P / R / F1."""
    if not per_class:
        raise ValueError("need at least one class")
    if supports is None:
        supports = [m.support for m in per_class]
    weights = np.asarray(supports, dtype=np.float64)
    if len(weights) != len(per_class):
        raise ValueError("supports must match the class list")
    total = weights.sum()
    if total <= 0:
        raise ValueError("total support is zero; weighted averages undefined")
    weights = weights / total
    p = np.array([m.precision for m in per_class])
    r = np.array([m.recall for m in per_class])
    f = np.array([m.f1 for m in per_class])
    return AveragedMetrics(
        macro_precision=float(p.mean()),
        macro_recall=float(r.mean()),
        macro_f1=float(f.mean()),
        weighted_precision=float(p @ weights),
        weighted_recall=float(r @ weights),
        weighted_f1=float(f @ weights),
    )


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    x: float
    y: float


def _group_by_threshold(scores: np.ndarray, labels: np.ndarray):
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    groups = []
    i = 0
    n = len(s)
    tp = fp = 0
    while i < n:
        thr = s[i]
        while i < n and s[i] == thr:
            if l[i]:
                tp += 1
            else:
                fp += 1
            i += 1
        groups.append((float(thr), tp, fp))
    return groups


def _check_binary(scores, labels) -> tuple[np.ndarray, np.ndarray, int, int]:
    s = np.asarray(scores, dtype=np.float64)
    l = np.asarray(labels).astype(bool)
    if s.shape != l.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    pos = int(l.sum())
    neg = int(l.size - pos)
    return s, l, pos, neg


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> list[CurvePoint]:
    """Points (threshold, fpr, tpr) sweeping the threshold from +inf down
    through every distinct score; starts at (0, 0), ends at (1, 1)."""
    s, l, pos, neg = _check_binary(scores, labels)
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs both positive and negative samples")
    points = [CurvePoint(math.inf, 0.0, 0.0)]
    for thr, tp, fp in _group_by_threshold(s, l):
        points.append(CurvePoint(thr, fp / neg, tp / pos))
    return points


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> list[CurvePoint]:
    """Points (threshold, recall, precision) by descending threshold.

    The zero-recall anchor copies the precision of the strictest real
    threshold, so a model that scores everything equally collapses to a
    flat line at the positive prevalence.
    """
    s, l, pos, _neg = _check_binary(scores, labels)
    if pos == 0:
        raise ValueError("PR needs at least one positive sample")
    groups = _group_by_threshold(s, l)
    first_tp, first_fp = groups[0][1], groups[0][2]
    anchor_precision = first_tp / (first_tp + first_fp)
    points = [CurvePoint(math.inf, 0.0, anchor_precision)]
    for thr, tp, fp in groups:
        points.append(CurvePoint(thr, tp / pos, tp / (tp + fp)))
    return points


def auc(points: Sequence[CurvePoint]) -> float:
    """Trapezoidal area under a curve sorted by x."""
    if len(points) < 2:
        raise ValueError("need at least two points for an area")
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        if b.x < a.x:
            raise ValueError("curve points must be sorted by non-decreasing x")
        total += (b.x - a.x) * (a.y + b.y) / 2.0
    return total


def one_vs_rest_curves(y_true: Sequence[int], probs: np.ndarray
                       ) -> dict[int, dict[str, list[CurvePoint]]]:
    """ROC and PR curves per class from an (N, C) probability matrix.

    Classes without both positives and negatives are skipped (their
    curves are undefined on this sample).
    """
    yt = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != yt.shape[0]:
        raise ValueError("probs must be (N, C) aligned with y_true")
    out: dict[int, dict[str, list[CurvePoint]]] = {}
    for c in range(p.shape[1]):
        labels = (yt == c).astype(int)
        pos = labels.sum()
        if pos == 0 or pos == len(labels):
            continue
        out[c] = {"roc": roc_curve(p[:, c], labels),
                  "pr": pr_curve(p[:, c], labels)}
    return out
