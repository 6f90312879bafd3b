"""Confidence quality metrics: normalised cross-entropy, ROC and PR curves/AUCs."""

import csv
from dataclasses import dataclass

import numpy as np

EPS = 1e-12


class DegenerateLabelsError(ValueError):
    """Metric undefined: labels contain a single class."""


@dataclass
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise ValueError("scores and labels must be 1-d and equal length")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be binary")

    @property
    def n_pos(self):
        return int(self.labels.sum())

    @property
    def n_neg(self):
        return int(len(self.labels) - self.labels.sum())


@dataclass
class CurvePoint:
    threshold: float
    x: float
    y: float


def nce(s: ScoredSet) -> float:
    """Relative cross-entropy improvement over the constant correct-rate predictor.

    Invariant to the logarithm base; natural log used internally. Scores are
    clamped to [EPS, 1-EPS] before taking logs.
    """
    y = s.labels.astype(float)
    if s.n_pos == 0 or s.n_neg == 0:
        raise DegenerateLabelsError("NCE undefined when all labels are equal")
    p1 = y.mean()
    h_bar = -(p1 * np.log(p1) + (1.0 - p1) * np.log(1.0 - p1))
    c = np.clip(s.scores, EPS, 1.0 - EPS)
    h = -np.mean(y * np.log(c) + (1.0 - y) * np.log(1.0 - c))
    return (h_bar - h) / h_bar


def _confusion_sweep(s: ScoredSet):
    """Cumulative TP/FP at each distinct threshold, thresholds descending."""
    order = np.argsort(-s.scores, kind="stable")
    sc = s.scores[order]
    y = s.labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # keep the last index of each run of equal scores
    last = np.nonzero(np.r_[sc[1:] != sc[:-1], True])[0]
    return sc[last], tp[last], fp[last]


def roc_points(s: ScoredSet):
    """ROC curve over all distinct thresholds, (0,0) sentinel included."""
    if s.n_pos == 0 or s.n_neg == 0:
        raise DegenerateLabelsError("ROC undefined without both classes")
    th, tp, fp = _confusion_sweep(s)
    pts = [CurvePoint(threshold=np.inf, x=0.0, y=0.0)]
    for t, tpc, fpc in zip(th, tp, fp):
        pts.append(CurvePoint(threshold=float(t), x=fpc / s.n_neg, y=tpc / s.n_pos))
    return pts


def roc_auc(s: ScoredSet) -> float:
    """Mann-Whitney statistic; ties get half credit.

    Equals the trapezoidal area under roc_points.
    """
    if s.n_pos == 0 or s.n_neg == 0:
        raise DegenerateLabelsError("ROC AUC undefined without both classes")
    # midranks of positive scores among all scores
    order = np.argsort(s.scores, kind="stable")
    sc = s.scores[order]
    ranks = np.empty(len(sc))
    i = 0
    while i < len(sc):
        j = i
        while j + 1 < len(sc) and sc[j + 1] == sc[i]:
            j += 1
        ranks[i:j + 1] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_rank_sum = ranks[s.labels[order] == 1].sum()
    p, n = s.n_pos, s.n_neg
    return (pos_rank_sum - p * (p + 1) / 2.0) / (p * n)


def pr_points(s: ScoredSet):
    """Precision-recall curve at every distinct threshold, best scores first."""
    if s.n_pos == 0:
        raise DegenerateLabelsError("PR undefined without positive labels")
    th, tp, fp = _confusion_sweep(s)
    pts = []
    for t, tpc, fpc in zip(th, tp, fp):
        pts.append(CurvePoint(threshold=float(t),
                              x=tpc / s.n_pos,
                              y=tpc / (tpc + fpc)))
    return pts


def pr_auc(s: ScoredSet) -> float:
    """Step-wise average precision: sum of (R_k - R_{k-1}) * P_k."""
    pts = pr_points(s)
    auc = 0.0
    prev_r = 0.0
    for p in pts:
        auc += (p.x - prev_r) * p.y
        prev_r = p.x
    return auc


def write_curve_csv(points, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["threshold", "x", "y"])
        for p in points:
            w.writerow([repr(p.threshold), repr(p.x), repr(p.y)])
