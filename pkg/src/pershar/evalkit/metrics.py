from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class SubjectMetrics:
    per_subject: dict[str, float]
    mean: float
    std: float


def aggregate_subjects(per_subject: dict[str, float]) -> SubjectMetrics:
    vals = np.array([per_subject[s] for s in sorted(per_subject)], dtype=np.float64)
    if vals.size == 0:
        raise DataError("no subjects to aggregate")
    return SubjectMetrics(per_subject=dict(sorted(per_subject.items())), mean=float(vals.mean()),
                          std=float(vals.std()))


def subject_accuracy(predictions, truths, subject_ids, expected_subjects=None) -> SubjectMetrics:
    """Accuracy per subject, then mean and population std across subjects."""
    pred = np.asarray(predictions)
    true = np.asarray(truths)
    subj = np.asarray(subject_ids, dtype=object)
    if not pred.shape == true.shape == subj.shape:
        raise DataError(f"length mismatch: {pred.shape}, {true.shape}, {subj.shape}")
    per = {}
    for s in sorted(set(subj.tolist())):
        m = subj == s
        per[str(s)] = float(np.mean(pred[m] == true[m]))
    for s in expected_subjects or ():
        if str(s) not in per:
            warnings.warn(f"subject {s} has no test segments; excluded", stacklevel=2)
    if not per:
        raise DataError("no test segments for any subject")
    return aggregate_subjects(per)


def auroc(scores, binary_labels) -> float:
    """Mann-Whitney form of the ROC area: P(pos > neg) + 0.5 P(pos == neg).

    Positives are the entries labelled 1 (out-of-distribution).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(binary_labels).astype(bool)
    if s.shape != y.shape:
        raise DataError(f"scores {s.shape} and labels {y.shape} differ")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("auroc needs both positive and negative labels")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    ranks = np.empty(s.size, dtype=np.float64)
    # average ranks over ties (1-based)
    uniq, start, counts = np.unique(s_sorted, return_index=True, return_counts=True)
    avg = start + (counts + 1) / 2.0
    ranks[order] = np.repeat(avg, counts)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def five_number(values) -> dict[str, float]:
    """min, quartiles (linear interpolation between order statistics) and max."""
    v = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    return {"min": float(v.min()), "q1": float(q1), "median": float(med), "q3": float(q3),
            "max": float(v.max())}
