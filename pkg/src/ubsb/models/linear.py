"""Elastic-net regularized logistic regression.

Fitted by proximal gradient descent with backtracking line search on the
smooth part (weighted log-loss plus the ridge term); the l1 part enters
through a soft-threshold proximal step. The intercept is never penalized.

The penalty on coefficients beta (excluding the intercept) is

    lambda * (alpha_mix * ||beta||_1 + (1 - alpha_mix) / 2 * ||beta||_2^2)

so alpha_mix=1 is the lasso and alpha_mix=0 is ridge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encode import FeatureMatrix
from .losses import clamp_probs, sigmoid


@dataclass
class LinearModel:
    coef: np.ndarray
    intercept: float
    converged: bool
    n_iter: int
    objective_trace: list[float] = field(default_factory=list)

    def margins(self, values: np.ndarray) -> np.ndarray:
        return values @ self.coef + self.intercept


def _smooth_parts(X, y, w, coef, intercept, l2):
    """Value and gradient of the smooth objective piece.

    Smooth piece = mean_w logloss + l2/2 * ||coef||^2 where mean_w divides
    by the total weight. Returns (value, grad_coef, grad_intercept).
    """
    margin = X @ coef + intercept
    p = clamp_probs(sigmoid(margin))
    wsum = w.sum()
    loss = -np.sum(w * (y * np.log(p) + (1 - y) * np.log(1 - p))) / wsum
    val = loss + 0.5 * l2 * float(coef @ coef)
    r = w * (p - y) / wsum
    grad_c = X.T @ r + l2 * coef
    grad_i = float(r.sum())
    return val, grad_c, grad_i


def elasticnet_objective(X, y, w, coef, intercept, alpha_mix, lam) -> float:
    """Full penalized objective at the given parameters."""
    val, _, _ = _smooth_parts(X, y, w, coef, intercept, lam * (1 - alpha_mix))
    return val + lam * alpha_mix * float(np.abs(coef).sum())


def elasticnet_gradient(X, y, w, coef, intercept, alpha_mix, lam):
    """Gradient of the objective where it is differentiable.

    The l1 term contributes lam*alpha_mix*sign(coef) for nonzero entries;
    at exactly-zero coefficients the subgradient is reported as 0.
    """
    _, gc, gi = _smooth_parts(X, y, w, coef, intercept, lam * (1 - alpha_mix))
    gc = gc + lam * alpha_mix * np.sign(coef)
    return gc, gi


def fit_logreg_elasticnet(
    matrix: FeatureMatrix,
    labels,
    weights,
    alpha_mix: float = 0.5,
    lam: float = 1e-2,
    tol: float = 1e-4,
    max_iter: int = 5000,
    init: LinearModel | None = None,
) -> LinearModel:
    if not 0.0 <= alpha_mix <= 1.0:
        raise ValueError("alpha_mix must lie in [0, 1]")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X = np.ascontiguousarray(matrix.values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n, p = X.shape
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} does not match {n} rows")

    wp = float(w[y == 1].sum())
    wn = float(w[y == 0].sum())
    if wp <= 0 or wn <= 0:
        raise ValueError("fit_logreg_elasticnet: both classes must carry weight")

    if init is not None:
        coef = init.coef.copy()
        intercept = init.intercept
    else:
        coef = np.zeros(p, dtype=np.float64)
        intercept = float(np.log(wp / wn))

    l1 = lam * alpha_mix
    l2 = lam * (1 - alpha_mix)
    step = 1.0
    trace: list[float] = []
    val, gc, gi = _smooth_parts(X, y, w, coef, intercept, l2)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # backtrack until the quadratic majorizer at the tried step holds
        while True:
            nc = coef - step * gc
            nc = np.sign(nc) * np.maximum(np.abs(nc) - step * l1, 0.0)
            ni = intercept - step * gi
            dc = nc - coef
            di = ni - intercept
            nval, ngc, ngi = _smooth_parts(X, y, w, nc, ni, l2)
            quad = val + gc @ dc + gi * di + (dc @ dc + di * di) / (2 * step)
            if nval <= quad + 1e-12:
                break
            step *= 0.5
            if step < 1e-12:
                break
        delta = max(np.max(np.abs(nc - coef), initial=0.0), abs(ni - intercept))
        coef, intercept = nc, ni
        val, gc, gi = nval, ngc, ngi
        trace.append(elasticnet_objective(X, y, w, coef, intercept, alpha_mix, lam))
        if delta < tol:
            converged = True
            break
        step = min(step * 2.0, 1e4)

    return LinearModel(coef=coef, intercept=intercept, converged=converged,
                       n_iter=it, objective_trace=trace)
