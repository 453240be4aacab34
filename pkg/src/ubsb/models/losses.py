"""Weighted logistic loss pieces shared by every learner family."""

from __future__ import annotations

import numpy as np

PROB_EPS = 1e-7


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def sigmoid(margin: np.ndarray) -> np.ndarray:
    # |margin| capped at 36: sigmoid saturates past PROB_EPS well before that,
    # and the cap keeps exp() overflow-free in a single vector pass
    z = np.clip(margin, -36.0, 36.0)
    return 1.0 / (1.0 + np.exp(-z))


def class_weights(labels) -> tuple[float, float]:
    """Balanced weights (w_pos, w_neg): each class carries half the mass, so
    w_pos*n_pos + w_neg*n_neg = n."""
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    n_pos = int((y == 1).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("class_weights: both classes must be present")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def class_weight_vector(labels) -> np.ndarray:
    """Per-row balanced weights: w_pos on positives, w_neg on negatives."""
    y = np.asarray(labels, dtype=np.int64)
    wp, wn = class_weights(y)
    return np.where(y == 1, wp, wn)


def logistic_grad_hess(prob, label, weight):
    """Per-row gradient and hessian of weighted log-loss at the margin:
    g = w(p - y), h = w p (1 - p); probabilities pre-clamped so h > 0."""
    p = clamp_probs(np.asarray(prob, dtype=np.float64))
    y = np.asarray(label, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    return w * (p - y), w * p * (1.0 - p)
