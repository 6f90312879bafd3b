"""Weighted Levenshtein alignment of hypothesis to reference and target derivation."""

from collections import namedtuple
from dataclasses import dataclass

from delconf.corpus import Targets

COR, SUB, DEL, INS = "COR", "SUB", "DEL", "INS"

AlignStep = namedtuple("AlignStep", ["kind", "hyp_idx", "ref_idx"])


class DegenerateReferenceError(ValueError):
    """WER undefined: empty reference with non-empty hypothesis."""


@dataclass(frozen=True)
class EditWeights:
    sub_cost: int = 10
    del_cost: int = 7
    ins_cost: int = 7

    def __post_init__(self):
        if min(self.sub_cost, self.del_cost, self.ins_cost) <= 0:
            raise ValueError("edit costs must be positive")


DEFAULT_WEIGHTS = EditWeights()


@dataclass
class Alignment:
    ops: list  # of AlignStep, hyp/ref indices each increasing
    total_cost: int


@dataclass
class ErrorCounts:
    correct: int
    substitutions: int
    deletions: int
    insertions: int
    wer: float


def levenshtein_align(hyp, ref, weights=DEFAULT_WEIGHTS) -> Alignment:
    """Minimum-cost alignment; backtrack prefers COR > SUB > DEL > INS."""
    m, n = len(hyp), len(ref)
    sc, dc, ic = weights.sub_cost, weights.del_cost, weights.ins_cost
    # dist[i][j]: cost aligning hyp[:i] with ref[:j]
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dist[i][0] = i * ic
    for j in range(1, n + 1):
        dist[0][j] = j * dc
    for i in range(1, m + 1):
        row, above = dist[i], dist[i - 1]
        hi = hyp[i - 1]
        for j in range(1, n + 1):
            diag = above[j - 1] + (0 if hi == ref[j - 1] else sc)
            row[j] = min(diag, row[j - 1] + dc, above[j] + ic)
    ops = []
    i, j = m, n
    while i > 0 or j > 0:
        cur = dist[i][j]
        if i > 0 and j > 0 and hyp[i - 1] == ref[j - 1] \
                and cur == dist[i - 1][j - 1]:
            ops.append(AlignStep(COR, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cur == dist[i - 1][j - 1] + sc \
                and hyp[i - 1] != ref[j - 1]:
            ops.append(AlignStep(SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif j > 0 and cur == dist[i][j - 1] + dc:
            ops.append(AlignStep(DEL, None, j - 1))
            j -= 1
        else:
            ops.append(AlignStep(INS, i - 1, None))
            i -= 1
    ops.reverse()
    return Alignment(ops=ops, total_cost=dist[m][n])


def derive_targets(alignment: Alignment, hyp_len: int) -> Targets:
    """Correctness and deletion targets from an edit script.

    d*_t flags a deletion in the gap after hypothesis word t (the gap after the
    final word included); s* flags a deletion before the first word. Consecutive
    deletions in one gap collapse to a single 1.
    """
    hyp_steps = sum(1 for op in alignment.ops if op.kind != DEL)
    if hyp_steps != hyp_len:
        raise ValueError(
            f"alignment consumes {hyp_steps} hypothesis words, expected {hyp_len}")
    c_star = [0] * hyp_len
    d_star = [0] * hyp_len
    s_star = 0
    last_hyp = None
    for op in alignment.ops:
        if op.kind == DEL:
            if last_hyp is None:
                s_star = 1
            else:
                d_star[last_hyp] = 1
        else:
            if op.kind == COR:
                c_star[op.hyp_idx] = 1
            last_hyp = op.hyp_idx
    return Targets(c_star=c_star, d_star=d_star, s_star=s_star)


def error_counts(alignment: Alignment) -> ErrorCounts:
    cor = sum(1 for op in alignment.ops if op.kind == COR)
    sub = sum(1 for op in alignment.ops if op.kind == SUB)
    dele = sum(1 for op in alignment.ops if op.kind == DEL)
    ins = sum(1 for op in alignment.ops if op.kind == INS)
    ref_len = cor + sub + dele
    if ref_len == 0:
        if ins > 0:
            raise DegenerateReferenceError(
                "WER undefined for empty reference with non-empty hypothesis")
        wer = 0.0
    else:
        wer = (sub + dele + ins) / ref_len
    return ErrorCounts(correct=cor, substitutions=sub, deletions=dele,
                       insertions=ins, wer=wer)
