"""Confusion-matrix measures and rank-sum comparisons of classification times."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise MetricsError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class PerformanceMeasures:
    n: int
    se: float
    sp: float
    acc: float
    pre: float
    mcc: float
    lr_pos: float
    lr_neg: float


def confusion(pred, truth) -> ConfusionCounts:
    """Count TP/FP/TN/FN over aligned present/absent label sequences."""
    pred = list(pred)
    truth = list(truth)
    if len(pred) != len(truth):
        raise MetricsError(f"length mismatch: {len(pred)} predictions vs {len(truth)} truths")
    tp = fp = tn = fn = 0
    for p, t in zip(pred, truth):
        if p == "present" and t == "present":
            tp += 1
        elif p == "present" and t == "absent":
            fp += 1
        elif p == "absent" and t == "absent":
            tn += 1
        elif p == "absent" and t == "present":
            fn += 1
        else:
            raise MetricsError(f"labels must be present/absent, got ({p!r}, {t!r})")
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int, errors: int) -> float:
    # zero denominator: 1 when the corresponding error count is also 0, else 0
    if den == 0:
        return 1.0 if errors == 0 else 0.0
    return num / den


def measures(counts: ConfusionCounts) -> PerformanceMeasures:
    """Sensitivity, specificity, accuracy, precision, MCC and likelihood ratios."""
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    total = counts.total
    if total < 1:
        raise MetricsError("empty confusion matrix")
    se = _ratio(tp, tp + fn, fn)
    sp = _ratio(tn, tn + fp, fp)
    acc = (tp + tn) / total
    pre = _ratio(tp, tp + fp, fp)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = 0.0 if denom == 0 else (tp * tn - fp * fn) / math.sqrt(denom)
    if sp == 1.0:
        lr_pos = math.inf if se > 0.0 else 0.0
    else:
        lr_pos = se / (1.0 - sp)
    if sp == 0.0:
        lr_neg = math.inf if se < 1.0 else 0.0
    else:
        lr_neg = (1.0 - se) / sp
    return PerformanceMeasures(n=total, se=se, sp=sp, acc=acc, pre=pre, mcc=mcc, lr_pos=lr_pos, lr_neg=lr_neg)


EXACT_MAX_N = 10


def wilcoxon_rank_sum(x, y, alternative: str = "two_sided") -> float:
    """Rank-sum test p-value with midrank ties.

    Exact by full enumeration of rank assignments when the combined sample
    size is at most 10 and there are no ties; otherwise a normal
    approximation with tie-corrected variance and continuity correction.
    ``alternative`` states how x compares to y.
    """
    if alternative not in ("greater", "less", "two_sided"):
        raise MetricsError(f"unknown alternative: {alternative}")
    x = np.asarray(list(x), dtype=float)
    y = np.asarray(list(y), dtype=float)
    if len(x) == 0 or len(y) == 0:
        raise MetricsError("empty sample")
    n1, n2 = len(x), len(y)
    N = n1 + n2
    combined = np.concatenate([x, y])
    ranks = stats.rankdata(combined)
    w = float(ranks[:n1].sum())
    has_ties = len(np.unique(combined)) < N

    if N <= EXACT_MAX_N and not has_ties:
        mu = n1 * (N + 1) / 2.0
        count_ge = count_le = count_far = 0
        n_total = 0
        for subset in combinations(range(1, N + 1), n1):
            ws = sum(subset)
            n_total += 1
            count_ge += ws >= w
            count_le += ws <= w
            count_far += abs(ws - mu) >= abs(w - mu)
        if alternative == "greater":
            return count_ge / n_total
        if alternative == "less":
            return count_le / n_total
        return count_far / n_total

    mu = n1 * (N + 1) / 2.0
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (N * (N - 1))
    var = n1 * n2 / 12.0 * ((N + 1) - tie_term)
    if var <= 0.0:
        return 1.0  # all observations tied: no evidence either way
    sd = math.sqrt(var)
    p_greater = stats.norm.sf((w - mu - 0.5) / sd)
    p_less = stats.norm.cdf((w - mu + 0.5) / sd)
    if alternative == "greater":
        return float(min(1.0, p_greater))
    if alternative == "less":
        return float(min(1.0, p_less))
    return float(min(1.0, 2.0 * min(p_greater, p_less)))


def pairwise_wilcoxon(groups: dict[str, list], alternative: str = "greater") -> dict[tuple[str, str], float]:
    """One p-value per unordered group pair, keyed (row, column).

    Group order follows the input mapping; rows come after columns, so with
    ``alternative="greater"`` each row group is tested for greater values
    than each earlier column group.
    """
    names = list(groups)
    if len(names) < 2:
        raise MetricsError("need at least 2 groups")
    for name in names:
        if len(groups[name]) == 0:
            raise MetricsError(f"empty sample for group {name}")
    table = {}
    for row_i in range(1, len(names)):
        for col_j in range(row_i):
            row, col = names[row_i], names[col_j]
            table[(row, col)] = wilcoxon_rank_sum(groups[row], groups[col], alternative)
    return table


def write_report_csv(rows: list[tuple[str, ConfusionCounts]], stream) -> None:
    """Evaluation report: one row per method, mirroring the measure columns."""

    def fmt(value: float) -> str:
        if math.isinf(value):
            return "inf"
        return repr(value)

    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["method", "n", "TP", "FP", "TN", "FN", "se", "sp", "acc", "pre", "MCC", "lr_pos", "lr_neg"])
    for method, counts in rows:
        m = measures(counts)
        writer.writerow(
            [
                method,
                m.n,
                counts.tp,
                counts.fp,
                counts.tn,
                counts.fn,
                fmt(m.se),
                fmt(m.sp),
                fmt(m.acc),
                fmt(m.pre),
                fmt(m.mcc),
                fmt(m.lr_pos),
                fmt(m.lr_neg),
            ]
        )
