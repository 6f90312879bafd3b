"""Data selection: frame-weighted confidence, deletion discounting, threshold
WER estimation, grid-search fitting and selection curves."""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Thresholds:
    theta_c: float
    theta_d: float
    theta_s: float
    theta_p: float

    def __post_init__(self):
        for v in (self.theta_c, self.theta_d, self.theta_s):
            if not 0.0 <= v <= 1.0:
                raise ValueError("thresholds must lie in [0,1]")
        if self.theta_p < 0:
            raise ValueError("theta_p must be >= 0")


@dataclass(frozen=True)
class DiscountParams:
    theta_d: float
    theta_s: float

    def __post_init__(self):
        if self.theta_d < 0 or self.theta_s < 0:
            raise ValueError("discount coefficients must be >= 0")


@dataclass
class SelectionItem:
    """Per-utterance evidence consumed by the ranking schemes."""
    id: str
    duration: float
    frames: list
    predictions: object  # corpus.Predictions
    true_counts: object = None  # align.ErrorCounts when references exist


@dataclass
class CurveRow:
    data_pct: float
    est_wer: float
    true_sub: float = None
    true_del: float = None
    true_ins: float = None
    true_tot: float = None


@dataclass
class SelectionResult:
    order: list  # utterance ids, best first
    rows: list   # of CurveRow, one per prefix


def frame_weighted_conf(c, frames) -> float:
    """Frame-weighted average confidence over one utterance."""
    if len(c) == 0 or len(c) != len(frames):
        raise ValueError("need equal, non-zero length confidence/frame sequences")
    lam = np.asarray(frames, float)
    return float(np.dot(lam, np.asarray(c, float)) / lam.sum())


def discount_scores(pred, params: DiscountParams):
    """Confidences discounted by scaled deletion estimates; unclamped, these
    feed ranking and averaging only."""
    chat = [c - params.theta_d * d for c, d in zip(pred.c, pred.d)]
    if chat:
        chat[0] -= params.theta_s * pred.s
    return chat


def _threshold_counts(pred, th: Thresholds):
    cor = sum(1 for c in pred.c if c >= th.theta_c)
    inc = len(pred.c) - cor
    dele = int(pred.s >= th.theta_s) + sum(1 for d in pred.d if d >= th.theta_d)
    return cor, inc, dele


def estimate_wer(pred, th: Thresholds, include_inc=True) -> float:
    """Thresholded WER estimate; +inf when every confidence falls below the
    correctness threshold (ranked last). include_inc=False drops the
    substitution/insertion term from the numerator (deletion-only ranking)."""
    if len(pred.c) == 0:
        raise ValueError("empty predictions")
    cor, inc, dele = _threshold_counts(pred, th)
    num = (inc if include_inc else 0) + dele
    den = th.theta_p * inc + cor
    if den == 0:
        return math.inf
    return num / den


def fit_thresholds(dev, grid) -> Thresholds:
    """Exhaustive grid search minimising mean squared error between true and
    estimated WER; ties break toward the lexicographically smallest point.

    dev: list of (true_wer, Predictions). grid: dict with value lists for
    theta_c, theta_d, theta_s, theta_p.
    """
    if not dev:
        raise ValueError("empty development set")
    axes = [sorted(grid[k]) for k in ("theta_c", "theta_d", "theta_s", "theta_p")]
    if any(len(a) == 0 for a in axes):
        raise ValueError("empty grid")
    best = None
    best_point = None
    for tc, td, ts, tp in itertools.product(*axes):
        th = Thresholds(theta_c=tc, theta_d=td, theta_s=ts, theta_p=tp)
        mse = 0.0
        for true_wer, pred in dev:
            est = estimate_wer(pred, th)
            err = (true_wer - est) ** 2 if math.isfinite(est) else math.inf
            mse += err
        mse /= len(dev)
        if best is None or mse < best:
            best = mse
            best_point = th
    return best_point


def _prefix_at_fraction(items, key, fraction):
    """Items sorted best-first by key, cut at the duration fraction."""
    ranked = sorted(items, key=lambda it: (key(it), it.id))
    total = sum(it.duration for it in ranked)
    prefix = []
    acc = 0.0
    for it in ranked:
        prefix.append(it)
        acc += it.duration
        if acc >= fraction * total:
            break
    return prefix


def _subset_stats(prefix):
    dels = sum(it.true_counts.deletions for it in prefix)
    errs = sum(it.true_counts.substitutions + it.true_counts.deletions
               + it.true_counts.insertions for it in prefix)
    ref = sum(it.true_counts.correct + it.true_counts.substitutions
              + it.true_counts.deletions for it in prefix)
    wer = errs / ref if ref else 0.0
    return dels, wer


def fit_discount(dev, grid, fraction=0.25, wer_slack=0.02) -> DiscountParams:
    """Grid search minimising true deletions in the top fraction (by duration)
    of the discounted ranking, subject to subset WER within wer_slack of the
    confidence-only subset. Falls back to the minimum-WER point when no grid
    point satisfies the guard.

    dev: list of SelectionItem with true_counts present. grid: dict with value
    lists for theta_d, theta_s.
    """
    if not dev:
        raise ValueError("empty development set")
    axes = [sorted(grid[k]) for k in ("theta_d", "theta_s")]
    if any(len(a) == 0 for a in axes):
        raise ValueError("empty grid")
    base_prefix = _prefix_at_fraction(
        dev, lambda it: -frame_weighted_conf(it.predictions.c, it.frames), fraction)
    _, base_wer = _subset_stats(base_prefix)
    best = None          # (deletions, theta_d, theta_s)
    best_any = None      # (wer, theta_d, theta_s) fallback
    for td, ts in itertools.product(*axes):
        params = DiscountParams(theta_d=td, theta_s=ts)
        prefix = _prefix_at_fraction(
            dev,
            lambda it: -frame_weighted_conf(
                discount_scores(it.predictions, params), it.frames),
            fraction)
        dels, wer = _subset_stats(prefix)
        if best_any is None or wer < best_any[0]:
            best_any = (wer, td, ts)
        if wer <= base_wer + wer_slack:
            if best is None or dels < best[0]:
                best = (dels, td, ts)
    if best is not None:
        return DiscountParams(theta_d=best[1], theta_s=best[2])
    return DiscountParams(theta_d=best_any[1], theta_s=best_any[2])


def rank_and_curve(items, scheme, params=None, include_inc=True) -> SelectionResult:
    """Rank utterances best-first and accumulate the selection curve.

    scheme: "confidence" | "discount" (with DiscountParams) | "threshold" (with
    Thresholds). Curve x-axis is the cumulative duration fraction; true error
    columns appear when every item carries true_counts.
    """
    if not items:
        raise ValueError("no utterances to rank")
    if scheme == "confidence":
        key = lambda it: -frame_weighted_conf(it.predictions.c, it.frames)
    elif scheme == "discount":
        if params is None:
            raise ValueError("discount scheme needs DiscountParams")
        key = lambda it: -frame_weighted_conf(
            discount_scores(it.predictions, params), it.frames)
    elif scheme == "threshold":
        if params is None:
            raise ValueError("threshold scheme needs Thresholds")
        key = lambda it: estimate_wer(it.predictions, params, include_inc)
    else:
        raise ValueError(f"unknown scheme {scheme}")
    ranked = sorted(items, key=lambda it: (key(it), it.id))
    total_dur = sum(it.duration for it in ranked)
    with_truth = all(it.true_counts is not None for it in ranked)

    rows = []
    acc_dur = 0.0
    est_num = 0.0
    est_den = 0.0
    cum = {"sub": 0, "del": 0, "ins": 0, "ref": 0}
    for it in ranked:
        acc_dur += it.duration
        if scheme == "threshold":
            cor, inc, dele = _threshold_counts(it.predictions, params)
            est_num += (inc if include_inc else 0) + dele
            est_den += params.theta_p * inc + cor
        else:
            lam = np.asarray(it.frames, float)
            c = (it.predictions.c if scheme == "confidence"
                 else discount_scores(it.predictions, params))
            est_num += float(np.dot(lam, 1.0 - np.asarray(c, float)))
            est_den += float(lam.sum())
        est = est_num / est_den if est_den > 0 else math.inf
        row = CurveRow(data_pct=100.0 * acc_dur / total_dur, est_wer=est)
        if with_truth:
            tc = it.true_counts
            cum["sub"] += tc.substitutions
            cum["del"] += tc.deletions
            cum["ins"] += tc.insertions
            cum["ref"] += tc.correct + tc.substitutions + tc.deletions
            ref = max(cum["ref"], 1)
            row.true_sub = cum["sub"] / ref
            row.true_del = cum["del"] / ref
            row.true_ins = cum["ins"] / ref
            row.true_tot = (cum["sub"] + cum["del"] + cum["ins"]) / ref
        rows.append(row)
    return SelectionResult(order=[it.id for it in ranked], rows=rows)


def write_curve_csv(result: SelectionResult, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["data_pct", "est_wer", "true_sub", "true_del",
                    "true_ins", "true_tot"])
        for r in result.rows:
            w.writerow([repr(r.data_pct), repr(r.est_wer)]
                       + ["" if v is None else repr(v)
                          for v in (r.true_sub, r.true_del, r.true_ins, r.true_tot)])
