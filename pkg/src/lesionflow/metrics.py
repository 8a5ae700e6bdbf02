"""Confusion matrix and the multiclass metric suite.

Per-class values are derived from the confusion matrix (rows = true class,
columns = predicted class):

    TP_c = counts[c][c]
    FP_c = column-c sum - TP_c
    FN_c = row-c sum    - TP_c
    TN_c = total - TP_c - FP_c - FN_c

Accuracy is trace/total. Macro averages are unweighted means over classes
with nonzero support; micro averages pool TP/FP/FN across classes before
dividing (which for single-label data equals accuracy). Metrics with a zero
denominator are reported as 0.0 and flagged as undefined in the report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import CLASS_NAMES
from .errors import EmptyInput, LengthMismatch

__all__ = [
    "ConfusionMatrix",
    "ClassificationReport",
    "confusion",
    "accuracy",
    "precision_per_class",
    "recall_per_class",
    "f1_per_class",
    "macro_average",
    "micro_average",
    "report",
]


@dataclass
class ConfusionMatrix:
    """Square count matrix, true class on rows, predicted class on columns."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.class_names)
        if self.counts.shape != (n, n):
            raise ValueError(f"counts must be {n}x{n}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    @property
    def fp(self) -> np.ndarray:
        return self.counts.sum(axis=0) - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.counts.sum(axis=1) - self.tp

    @property
    def tn(self) -> np.ndarray:
        return self.total - self.tp - self.fp - self.fn


def _default_names(num_classes: int) -> tuple[str, ...]:
    if num_classes == len(CLASS_NAMES):
        return CLASS_NAMES
    return tuple(f"class_{c}" for c in range(num_classes))


def confusion(y_true, y_pred, num_classes: int | None = None,
              class_names: tuple[str, ...] | None = None) -> ConfusionMatrix:
    """Count (true, predicted) label pairs into a confusion matrix."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise EmptyInput("need at least one labeled sample")
    if class_names is not None:
        n = len(class_names)
    elif num_classes is not None:
        n = num_classes
        class_names = _default_names(n)
    else:
        n = len(CLASS_NAMES)
        class_names = CLASS_NAMES
    if y_true.min() < 0 or y_pred.min() < 0 or y_true.max() >= n or y_pred.max() >= n:
        raise ValueError(f"labels must lie in [0, {n})")
    counts = np.bincount(y_true * n + y_pred, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of samples on the diagonal."""
    return float(np.trace(cm.counts) / cm.total)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(len(num), dtype=np.float64)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def precision_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """TP / (TP + FP) per class; 0.0 where the class is never predicted."""
    return _safe_ratio(cm.tp, cm.tp + cm.fp)


def recall_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """TP / (TP + FN) per class (sensitivity); 0.0 where the class has no samples."""
    return _safe_ratio(cm.tp, cm.tp + cm.fn)


def f1_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """Harmonic mean of precision and recall; 0.0 where both are zero."""
    p = precision_per_class(cm)
    r = recall_per_class(cm)
    return _safe_ratio(2.0 * p * r, p + r)


def macro_average(values, supports) -> float:
    """Unweighted mean over classes with nonzero support."""
    values = np.asarray(values, dtype=np.float64)
    supports = np.asarray(supports)
    present = supports > 0
    if not present.any():
        return 0.0
    return float(values[present].mean())


def micro_average(cm: ConfusionMatrix, metric: str = "precision") -> float:
    """Pool TP and FP (or FN) across classes before dividing.

    For single-label multiclass data the pooled FP and FN totals coincide,
    so micro precision, micro recall, and micro F1 all equal accuracy.
    """
    tp = int(cm.tp.sum())
    fp = int(cm.fp.sum())
    fn = int(cm.fn.sum())
    if metric == "precision":
        return float(tp / (tp + fp)) if tp + fp else 0.0
    if metric == "recall":
        return float(tp / (tp + fn)) if tp + fn else 0.0
    if metric == "f1":
        p = micro_average(cm, "precision")
        r = micro_average(cm, "recall")
        return 2.0 * p * r / (p + r) if p + r else 0.0
    raise ValueError(f"unknown micro metric {metric!r}")


@dataclass
class ClassificationReport:
    """All per-class and averaged metrics for one prediction run.

    ``*_defined`` masks mark entries whose denominator was nonzero; an
    undefined metric is reported as 0.0.
    """

    class_names: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    precision_defined: np.ndarray
    recall_defined: np.ndarray
    f1_defined: np.ndarray
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    total: int

    def to_json_dict(self) -> dict:
        per_class = []
        for i, name in enumerate(self.class_names):
            per_class.append({
                "class": name,
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.support[i]),
                "precision_defined": bool(self.precision_defined[i]),
                "recall_defined": bool(self.recall_defined[i]),
                "f1_defined": bool(self.f1_defined[i]),
            })
        return {
            "per_class": per_class,
            "accuracy": self.accuracy,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "micro": {"precision": self.micro_precision, "recall": self.micro_recall, "f1": self.micro_f1},
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        """Aligned plain-text table: per-class rows, then accuracy and the
        macro/micro summary rows. An asterisk marks an undefined metric."""
        name_w = max(12, max(len(n) for n in self.class_names) + 2)
        lines = [f"{'':<{name_w}}{'precision':>11}{'recall':>11}{'f1':>11}{'support':>10}"]

        def fmt(value, defined):
            return f"{value:.4f}" + ("" if defined else "*")

        for i, name in enumerate(self.class_names):
            lines.append(
                f"{name:<{name_w}}"
                f"{fmt(self.precision[i], self.precision_defined[i]):>11}"
                f"{fmt(self.recall[i], self.recall_defined[i]):>11}"
                f"{fmt(self.f1[i], self.f1_defined[i]):>11}"
                f"{int(self.support[i]):>10}"
            )
        lines.append("")
        lines.append(f"{'accuracy':<{name_w}}{'':>11}{'':>11}{self.accuracy:>11.4f}{self.total:>10}")
        lines.append(
            f"{'macro avg':<{name_w}}{self.macro_precision:>11.4f}"
            f"{self.macro_recall:>11.4f}{self.macro_f1:>11.4f}{self.total:>10}"
        )
        lines.append(
            f"{'micro avg':<{name_w}}{self.micro_precision:>11.4f}"
            f"{self.micro_recall:>11.4f}{self.micro_f1:>11.4f}{self.total:>10}"
        )
        if not (self.precision_defined.all() and self.recall_defined.all() and self.f1_defined.all()):
            lines.append("")
            lines.append("* metric undefined (zero denominator), reported as 0")
        return "\n".join(lines) + "\n"


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """Assemble every metric for a confusion matrix."""
    if cm.total == 0:
        raise EmptyInput("confusion matrix has no samples")
    p = precision_per_class(cm)
    r = recall_per_class(cm)
    f1 = f1_per_class(cm)
    supports = cm.supports
    return ClassificationReport(
        class_names=cm.class_names,
        precision=p,
        recall=r,
        f1=f1,
        support=supports,
        precision_defined=(cm.tp + cm.fp) > 0,
        recall_defined=(cm.tp + cm.fn) > 0,
        f1_defined=(p + r) > 0,
        accuracy=accuracy(cm),
        macro_precision=macro_average(p, supports),
        macro_recall=macro_average(r, supports),
        macro_f1=macro_average(f1, supports),
        micro_precision=micro_average(cm, "precision"),
        micro_recall=micro_average(cm, "recall"),
        micro_f1=micro_average(cm, "f1"),
        total=cm.total,
    )
