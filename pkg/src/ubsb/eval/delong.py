"""Paired DeLong test for correlated AUCs.

Structural components are computed from midranks in O(n log n): for a
positive score x_i, V10_i is the fraction of negatives it beats (ties count
half); V01_j mirrors this for negatives. The variance of the AUC difference
combines the empirical covariances of the paired component vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import midranks


@dataclass
class DeLongResult:
    auc_a: float
    auc_b: float
    delta: float              # auc_b - auc_a
    var_delta: float
    z: float
    p_value: float
    degenerate: bool = False  # var 0 with a nonzero delta


def structural_components(scores, labels) -> tuple[float, np.ndarray, np.ndarray]:
    """(auc, V10 over positives, V01 over negatives) via midranks."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    pos = s[y == 1]
    neg = s[y == 0]
    m, n = len(pos), len(neg)
    if m == 0 or n == 0:
        raise ValueError("structural_components: both classes must be present")
    r_all = midranks(np.concatenate([pos, neg]))
    r_pos = midranks(pos)
    r_neg = midranks(neg)
    v10 = (r_all[:m] - r_pos) / n
    v01 = 1.0 - (r_all[m:] - r_neg) / m
    auc = (r_all[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    return float(auc), v10, v01


def _cov(a: np.ndarray, b: np.ndarray) -> float:
    k = len(a)
    if k < 2:
        return 0.0
    return float((a - a.mean()) @ (b - b.mean())) / (k - 1)


def delong_paired(scores_a, scores_b, labels) -> DeLongResult:
    """Two-sided paired test of AUC(b) - AUC(a) on shared labels."""
    sa = np.asarray(scores_a, dtype=np.float64)
    sb = np.asarray(scores_b, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if sa.shape != sb.shape or sa.shape != y.shape:
        raise ValueError("delong_paired: score vectors and labels must align")
    auc_a, v10_a, v01_a = structural_components(sa, y)
    auc_b, v10_b, v01_b = structural_components(sb, y)
    m, n = len(v10_a), len(v01_a)
    s10 = _cov(v10_a, v10_a) + _cov(v10_b, v10_b) - 2 * _cov(v10_a, v10_b)
    s01 = _cov(v01_a, v01_a) + _cov(v01_b, v01_b) - 2 * _cov(v01_a, v01_b)
    var = s10 / m + s01 / n
    delta = auc_b - auc_a
    if var <= 0:
        if delta == 0:
            return DeLongResult(auc_a, auc_b, delta, 0.0, 0.0, 1.0)
        z = math.inf if delta > 0 else -math.inf
        return DeLongResult(auc_a, auc_b, delta, 0.0, z, 0.0, degenerate=True)
    z = delta / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return DeLongResult(auc_a, auc_b, delta, var, z, p)
