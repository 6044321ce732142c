"""Confusion matrix and Cohen's kappa with leaf as the positive class."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .cloud import LEAF, STEM, as_labels


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError(f"negative count in {self}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("empty confusion matrix")
        return (self.tp + self.tn) / self.total

    @property
    def kappa(self) -> float:
        return kappa(self)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["accuracy"] = self.accuracy
        d["kappa"] = self.kappa
        return d


def confusion(standard, predicted) -> ConfusionMatrix:
    s = standard if isinstance(standard, np.ndarray) and standard.dtype == np.int8 else as_labels(standard)
    c = predicted if isinstance(predicted, np.ndarray) and predicted.dtype == np.int8 else as_labels(predicted)
    if len(s) != len(c):
        raise ValueError(f"label lengths differ: {len(s)} vs {len(c)}")
    for arr in (s, c):
        if not np.isin(arr, (LEAF, STEM)).all():
            raise ValueError("labels must be leaf (1) or stem (2)")
    tp = int(np.count_nonzero((s == LEAF) & (c == LEAF)))
    tn = int(np.count_nonzero((s == STEM) & (c == STEM)))
    fp = int(np.count_nonzero(c == LEAF)) - tp
    fn = int(np.count_nonzero(c == STEM)) - tn
    return ConfusionMatrix(tp, tn, fp, fn)


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa; when chance agreement is 1 returns 1 for full agreement, else 0."""
    n = cm.total
    if n == 0:
        raise ValueError("empty confusion matrix")
    p_o = (cm.tp + cm.tn) / n
    p_e = ((cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def report_record(cm: ConfusionMatrix, method: str, seed, **params) -> dict:
    rec = cm.as_dict()
    rec["method"] = method
    rec["seed"] = seed
    rec.update(params)
    return rec


def format_report(rec: dict) -> str:
    return (
        f"method={rec['method']} seed={rec['seed']}\n"
        f"            pred leaf  pred stem\n"
        f"true leaf  {rec['tp']:>10d} {rec['fn']:>10d}\n"
        f"true stem  {rec['fp']:>10d} {rec['tn']:>10d}\n"
        f"accuracy={rec['accuracy']:.4f} kappa={rec['kappa']:.4f}\n"
    )


def to_jsonl(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True) + "\n"
