"""Monotone piecewise-constant confidence mapping.

Equal-occupancy binning of training scores followed by pool-adjacent-violators,
giving the same function class as a one-feature monotone decision tree.
"""

import bisect
import json
from dataclasses import dataclass

import numpy as np

from delconf.metrics import ScoredSet


@dataclass
class PiecewiseMap:
    boundaries: list  # strictly increasing interior cut points
    values: list      # one per cell, non-decreasing; len(values) == len(boundaries) + 1

    def __post_init__(self):
        if len(self.values) != len(self.boundaries) + 1:
            raise ValueError("need one value per cell")
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            if not a < b:
                raise ValueError("boundaries must be strictly increasing")
        for a, b in zip(self.values, self.values[1:]):
            if a > b:
                raise ValueError("values must be non-decreasing")


def _pav(values, weights):
    """Weighted pool-adjacent-violators; returns non-decreasing pooled values."""
    vals = list(map(float, values))
    wts = list(map(float, weights))
    # blocks of (value, weight, count)
    blocks = []
    for v, w in zip(vals, wts):
        blocks.append([v, w, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            v1, w1, n1 = blocks.pop()
            v0, w0, n0 = blocks.pop()
            w = w0 + w1
            blocks.append([(v0 * w0 + v1 * w1) / w, w, n0 + n1])
    out = []
    for v, _, n in blocks:
        out.extend([v] * n)
    return out


def fit_monotone_map(train: ScoredSet, n_bins: int = 50) -> PiecewiseMap:
    """Equal-occupancy bins, cell value = positive fraction, pooled monotone."""
    n = len(train.scores)
    if n == 0:
        raise ValueError("empty training set")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    order = np.argsort(train.scores, kind="stable")
    sc = train.scores[order]
    y = train.labels[order].astype(float)
    edges = [n * k // n_bins for k in range(1, n_bins)]
    # boundary = score at the edge; half-open cells [b_i, b_{i+1}) so the edge
    # score itself lands in the right cell
    cuts = []
    for e in edges:
        b = float(sc[e])
        if not cuts or b > cuts[-1]:
            cuts.append(b)
    cell_vals, cell_wts = [], []
    lo = 0
    split_points = [bisect.bisect_left(sc, b, lo=0) for b in cuts] + [n]
    for hi in split_points:
        if hi > lo:
            cell_vals.append(y[lo:hi].mean())
            cell_wts.append(hi - lo)
        else:
            # empty cell (can happen with heavy score ties): inherit neighbour
            cell_vals.append(cell_vals[-1] if cell_vals else y.mean())
            cell_wts.append(0.0)
        lo = hi
    pooled = _pav(cell_vals, [max(w, 1e-9) for w in cell_wts])
    pooled = [min(1.0, max(0.0, v)) for v in pooled]
    return PiecewiseMap(boundaries=cuts, values=pooled)


def apply_map(pmap: PiecewiseMap, score: float) -> float:
    """Value of the cell containing the score; scores on a boundary go right."""
    return pmap.values[bisect.bisect_right(pmap.boundaries, score)]


def apply_map_array(pmap: PiecewiseMap, scores) -> np.ndarray:
    idx = np.searchsorted(np.asarray(pmap.boundaries), np.asarray(scores, float),
                          side="right")
    return np.asarray(pmap.values, float)[idx]


def map_to_json(pmap: PiecewiseMap) -> dict:
    return {"boundaries": list(pmap.boundaries), "values": list(pmap.values)}


def map_from_json(obj) -> PiecewiseMap:
    return PiecewiseMap(boundaries=list(obj["boundaries"]),
                        values=list(obj["values"]))


def save_map(pmap: PiecewiseMap, path):
    with open(path, "w") as f:
        json.dump(map_to_json(pmap), f)
        f.write("\n")


def load_map(path) -> PiecewiseMap:
    with open(path) as f:
        return map_from_json(json.load(f))
