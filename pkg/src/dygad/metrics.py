"""Ranking metrics and evaluation reports.

Conventions: roc_auc counts tied positive/negative pairs as 1/2 (equivalent
to trapezoidal ROC integration); average_precision breaks score ties by
stable original index order; best_f1 sweeps every distinct score as a
threshold (predict anomalous when score >= threshold) and returns the lowest
threshold achieving the maximum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError


def _as_arrays(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError(f"scores {s.shape} and labels {y.shape} must be "
                        "1-D and equal-length")
    return s, y


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative."""
    s, y = _as_arrays(scores, labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc_auc needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    # average ranks within tied groups
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Mean of precision-at-rank over the positives, descending score order."""
    s, y = _as_arrays(scores, labels)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise DataError("average_precision needs at least one positive")
    order = np.lexsort((np.arange(len(s)), -s))  # desc score, stable by index
    hits = y[order] == 1
    tp = np.cumsum(hits)
    prec_at_pos = tp[hits] / (np.flatnonzero(hits) + 1)
    return float(prec_at_pos.sum() / n_pos)


def best_f1(scores, labels) -> tuple[float, float]:
    """Maximum F1 over all distinct-score thresholds, lowest threshold on ties."""
    s, y = _as_arrays(scores, labels)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise DataError("best_f1 needs at least one positive")
    best = (-1.0, 0.0)
    for thr in np.unique(s):
        pred = s >= thr
        tp = int((pred & (y == 1)).sum())
        fp = int((pred & (y == 0)).sum())
        fn = n_pos - tp
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        if f1 > best[0] or (f1 == best[0] and thr < best[1]):
            best = (f1, float(thr))
    return best


@dataclass
class EvalReport:
    """Scores, labels and the three metrics for one evaluation run."""

    task: str
    scores: list
    labels: list
    auc: float
    ap: float
    f1: float
    threshold: float
    config_hash: str = ""
    wall_ms: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "EvalReport":
        return EvalReport(**json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path) -> "EvalReport":
        return EvalReport.from_json(Path(path).read_text())

    def dump_scores_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("event,score,label\n")
            for i, (sc, y) in enumerate(zip(self.scores, self.labels)):
                fh.write(f"{i},{sc!r},{y}\n")


def build_report(task: str, scores, labels, config_hash: str = "",
                 wall_ms: float = 0.0) -> EvalReport:
    """Compute all three metrics; F1 from the best-threshold sweep."""
    s, y = _as_arrays(scores, labels)
    f1, thr = best_f1(s, y)
    return EvalReport(task=task, scores=s.tolist(), labels=y.tolist(),
                      auc=roc_auc(s, y), ap=average_precision(s, y),
                      f1=f1, threshold=thr, config_hash=config_hash,
                      wall_ms=wall_ms)
