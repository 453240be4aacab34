"""Ranking and classification metrics plus the in-fold threshold policy."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


def midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group mean rank."""
    n = len(x)
    if n == 0:
        return np.empty(0, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    np.not_equal(sx[1:], sx[:-1], out=new_group[1:])
    starts = np.flatnonzero(new_group)
    counts = np.diff(np.append(starts, n))
    # tied block starting at sorted position i with c members: mean rank i + (c+1)/2
    group_rank = starts + (counts + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = group_rank[np.cumsum(new_group) - 1]
    return ranks


def roc_auc(scores, labels) -> float:
    """Rank-sum AUC with midranks: P(s_pos > s_neg) + 0.5 P(s_pos = s_neg)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc: both classes must be present")
    ranks = midranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


class PrecisionRecallF1(NamedTuple):
    precision: float
    recall: float
    f1: float
    no_positive_predictions: bool


def precision_recall_f1(predictions, labels) -> PrecisionRecallF1:
    """Confusion-count metrics; precision defined 0 (flagged) when nothing
    is predicted positive."""
    p = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    tp = int(((p == 1) & (y == 1)).sum())
    fp = int(((p == 1) & (y == 0)).sum())
    fn = int(((p == 0) & (y == 1)).sum())
    no_pos = (tp + fp) == 0
    precision = 0.0 if no_pos else tp / (tp + fp)
    recall = 0.0 if (tp + fn) == 0 else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return PrecisionRecallF1(precision, recall, f1, no_pos)


def _f1_from_counts(tp: float, fp: float, fn: float) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def select_threshold_max_f1(train_scores, train_labels) -> float:
    """Threshold (predict positive when score >= t) maximizing training F1.

    Candidates are +inf, midpoints between consecutive distinct scores, and
    -inf; ties resolve to the lowest threshold, trading precision for recall.
    """
    s = np.asarray(train_scores, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    if len(s) == 0:
        raise ValueError("select_threshold_max_f1: empty scores")
    order = np.argsort(-s, kind="stable")
    sy = y[order]
    ss = s[order]
    total_pos = int((y == 1).sum())

    # group boundaries of distinct scores, descending
    boundaries = np.flatnonzero(np.diff(ss) != 0)
    group_ends = np.concatenate([boundaries, [len(ss) - 1]])
    cum_tp = np.cumsum(sy)[group_ends].astype(np.float64)
    cum_n = (group_ends + 1).astype(np.float64)
    cum_fp = cum_n - cum_tp

    distinct = ss[group_ends]                      # descending distinct scores
    # candidate i = predict positive for the top i distinct groups
    cuts = np.empty(len(distinct) + 1, dtype=np.float64)
    cuts[0] = np.inf
    cuts[1:-1] = (distinct[:-1] + distinct[1:]) / 2.0
    cuts[-1] = -np.inf

    best_f1, best_cut = -1.0, np.inf
    for i, cut in enumerate(cuts):
        tp = 0.0 if i == 0 else cum_tp[i - 1]
        fp = 0.0 if i == 0 else cum_fp[i - 1]
        fn = total_pos - tp
        f1 = _f1_from_counts(tp, fp, fn)
        if f1 > best_f1 or (f1 == best_f1 and cut < best_cut):
            best_f1, best_cut = f1, cut
    return float(best_cut)


def weighted_logloss(probs, labels, weights) -> float:
    """Mean weighted cross-entropy with probabilities clamped away from 0/1."""
    p = np.clip(np.asarray(probs, dtype=np.float64), 1e-7, 1 - 1e-7)
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    loss = -(y * np.log(p) + (1 - y) * np.log(1 - p))
    return float((w * loss).sum() / w.sum())
