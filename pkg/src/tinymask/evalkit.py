"""Confusion matrices, per-class precision/recall/F1 and float32-vs-int8 comparison.

The positive class is Mask (label 1) everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeMismatch


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total

    def to_grid(self):
        """2x2 text grid: rows are true labels, columns predictions, Mask first."""
        w = max(len(str(v)) for v in (self.tp, self.fp, self.tn, self.fn)) + 2
        return (
            f"{'':>14}{'pred Mask':>{max(w, 11)}}{'pred No-Mask':>{max(w, 14)}}\n"
            f"{'true Mask':>14}{self.tp:>{max(w, 11)}}{self.fn:>{max(w, 14)}}\n"
            f"{'true No-Mask':>14}{self.fp:>{max(w, 11)}}{self.tn:>{max(w, 14)}}\n"
        )


def _labels(v, name):
    v = np.asarray(v).reshape(-1)
    if not np.isin(v, (0, 1)).all():
        raise DataError(f"{name} must contain only 0/1 labels")
    return v.astype(np.int64)


def confusion(preds, truth) -> ConfusionMatrix:
    preds = _labels(preds, "preds")
    truth = _labels(truth, "truth")
    if preds.shape != truth.shape:
        raise ShapeMismatch(f"{len(preds)} predictions vs {len(truth)} labels")
    if len(preds) == 0:
        raise ShapeMismatch("need at least one sample")
    return ConfusionMatrix(
        tp=int(np.sum((preds == 1) & (truth == 1))),
        fp=int(np.sum((preds == 1) & (truth == 0))),
        tn=int(np.sum((preds == 0) & (truth == 0))),
        fn=int(np.sum((preds == 0) & (truth == 1))),
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False


def _metrics(tp, fp, fn):
    p_den, r_den = tp + fp, tp + fn
    precision = tp / p_den if p_den else 0.0
    recall = tp / r_den if r_den else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ClassMetrics(precision, recall, f1, r_den, degenerate=not (p_den and r_den))


@dataclass(frozen=True)
class ClassificationReport:
    mask: ClassMetrics
    no_mask: ClassMetrics
    accuracy: float
    cm: ConfusionMatrix

    def rows(self):
        return [("Mask", self.mask), ("No-Mask", self.no_mask)]

    def to_text(self, title=None):
        lines = [] if title is None else [title]
        lines.append(f"{'Label':<10}{'Precision':>10}{'Recall':>10}{'F-1 Score':>11}")
        for name, m in self.rows():
            flag = " *" if m.degenerate else ""
            lines.append(f"{name:<10}{m.precision:>10.2f}{m.recall:>10.2f}{m.f1:>11.2f}{flag}")
        lines.append(f"accuracy: {100 * self.accuracy:.2f} %")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        rows = ["label,precision,recall,f1,support,degenerate"]
        for name, m in self.rows():
            rows.append(f"{name},{m.precision:.4f},{m.recall:.4f},{m.f1:.4f},{m.support},{int(m.degenerate)}")
        rows.append(f"accuracy,{self.accuracy:.4f},,,{self.cm.total},")
        return "\n".join(rows) + "\n"


def report(cm: ConfusionMatrix) -> ClassificationReport:
    if cm.total <= 0:
        raise DataError("empty confusion matrix")
    return ClassificationReport(
        mask=_metrics(cm.tp, cm.fp, cm.fn),
        no_mask=_metrics(cm.tn, cm.fn, cm.fp),
        accuracy=cm.accuracy,
        cm=cm,
    )


@dataclass(frozen=True)
class CompareReport:
    float_report: ClassificationReport
    int8_report: ClassificationReport
    agreement: float

    @property
    def delta_points(self):
        """int8 minus float32 accuracy, in percentage points."""
        return accuracy_delta_points(self.float_report.accuracy, self.int8_report.accuracy)

    def to_text(self):
        f, q = self.float_report, self.int8_report
        return (
            f"{'':<10}{'float32':>10}{'int8':>10}\n"
            f"{'accuracy':<10}{100 * f.accuracy:>9.2f}%{100 * q.accuracy:>9.2f}%\n"
            f"delta (int8 - float32): {self.delta_points:+.2f} pts\n"
            f"prediction agreement: {100 * self.agreement:.2f} %\n"
        )

    def to_csv(self):
        f, q = self.float_report, self.int8_report
        return (
            "metric,float32,int8\n"
            f"accuracy,{f.accuracy:.4f},{q.accuracy:.4f}\n"
            f"mask_precision,{f.mask.precision:.4f},{q.mask.precision:.4f}\n"
            f"mask_recall,{f.mask.recall:.4f},{q.mask.recall:.4f}\n"
            f"mask_f1,{f.mask.f1:.4f},{q.mask.f1:.4f}\n"
            f"no_mask_precision,{f.no_mask.precision:.4f},{q.no_mask.precision:.4f}\n"
            f"no_mask_recall,{f.no_mask.recall:.4f},{q.no_mask.recall:.4f}\n"
            f"no_mask_f1,{f.no_mask.f1:.4f},{q.no_mask.f1:.4f}\n"
            f"delta_points,{self.delta_points:.4f},\n"
            f"agreement,{self.agreement:.4f},\n"
        )


def accuracy_delta_points(float_acc, int8_acc):
    return 100.0 * (int8_acc - float_acc)


def compare(float_preds, int8_preds, truth) -> CompareReport:
    float_preds = _labels(float_preds, "float_preds")
    int8_preds = _labels(int8_preds, "int8_preds")
    if float_preds.shape != int8_preds.shape:
        raise DataError("float32 and int8 results cover different evaluation sets")
    return CompareReport(
        report(confusion(float_preds, truth)),
        report(confusion(int8_preds, truth)),
        float(np.mean(float_preds == int8_preds)),
    )
