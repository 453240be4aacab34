"""Policy-level lift of the Full model over the Demo model.

Both policies approve the applicants the model considers safest, so scores
(default probabilities) are turned into a goodness ordering first. Approval
thresholds come from each fold's training portion of the pooled out-of-fold
scores; deltas are counted on the held-out fold and expressed per 100
screened applicants. Confidence intervals resample applicants (stratified by
label) and recount under the fixed fold thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ablation import OofPredictions, VARIANTS


@dataclass
class LiftReport:
    policy: str                     # fixed_approval | fixed_default
    value: float                    # r or t, in percent
    fold_good_approvals: list[float] = field(default_factory=list)
    fold_bad_rejections: list[float] = field(default_factory=list)
    mean_good_approvals: float = 0.0
    mean_bad_rejections: float = 0.0
    ci_good: tuple[float, float] | None = None
    ci_bad: tuple[float, float] | None = None
    zero_approval_folds: list[tuple[int, str]] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "policy": self.policy,
            "value": self.value,
            "per_100_screened": {
                "good_approvals_delta": {
                    "per_fold": self.fold_good_approvals,
                    "mean": self.mean_good_approvals,
                    "ci": list(self.ci_good) if self.ci_good else None,
                },
                "bad_rejections_delta": {
                    "per_fold": self.fold_bad_rejections,
                    "mean": self.mean_bad_rejections,
                    "ci": list(self.ci_bad) if self.ci_bad else None,
                },
            },
            "zero_approval_folds": [list(z) for z in self.zero_approval_folds],
        }


def _nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Smallest value with at least q of the sample at or below it; q = 0
    maps to -inf so an approve-everyone policy also covers held-out records
    below the training minimum."""
    if q <= 0.0:
        return -math.inf
    s = np.sort(values)
    idx = max(int(math.ceil(q * len(s))), 1) - 1
    return float(s[idx])


def _approval_matrix(oof: OofPredictions, threshold_fn) -> dict[str, np.ndarray]:
    """Per-record approval booleans per variant.

    threshold_fn(train_good, train_labels) -> goodness threshold or None
    (None means approve nobody on that fold). Thresholds are computed on the
    fold's training portion and applied to its held-out records.
    """
    approved = {v: np.zeros(oof.n, dtype=bool) for v in VARIANTS}
    zero_folds: list[tuple[int, str]] = []
    for f in range(oof.n_folds()):
        te = oof.fold_index == f
        tr = ~te
        for v in VARIANTS:
            good = 1.0 - oof.variant_scores(v)
            tau = threshold_fn(good[tr], oof.labels[tr])
            if tau is None:
                zero_folds.append((f, v))
                continue
            approved[v][te] = good[te] >= tau
    approved["_zero_folds"] = zero_folds
    return approved


def _per_fold_deltas(oof: OofPredictions, approved) -> tuple[list[float], list[float]]:
    goods, bads = [], []
    for f in range(oof.n_folds()):
        te = oof.fold_index == f
        n_te = int(te.sum())
        y = oof.labels[te]
        ad = approved["Demo"][te]
        af = approved["Full"][te]
        d_good = (np.sum(af & (y == 0)) - np.sum(ad & (y == 0))) * 100.0 / n_te
        d_bad = (np.sum(~af & (y == 1)) - np.sum(~ad & (y == 1))) * 100.0 / n_te
        goods.append(float(d_good))
        bads.append(float(d_bad))
    return goods, bads


def _pooled_delta_stats(oof: OofPredictions, approved):
    """Closures for bootstrap resampling: pooled per-100 deltas at an index
    multiset, with fold thresholds held fixed."""
    good_mask = oof.labels == 0
    bad_mask = ~good_mask
    ga_full = approved["Full"] & good_mask
    ga_demo = approved["Demo"] & good_mask
    br_full = ~approved["Full"] & bad_mask
    br_demo = ~approved["Demo"] & bad_mask

    def stat_good(idx: np.ndarray) -> float:
        return float((ga_full[idx].sum() - ga_demo[idx].sum()) * 100.0 / len(idx))

    def stat_bad(idx: np.ndarray) -> float:
        return float((br_full[idx].sum() - br_demo[idx].sum()) * 100.0 / len(idx))

    return stat_good, stat_bad


def _build_report(policy: str, value: float, oof: OofPredictions, approved,
                  bootstrap_b: int, seed: int) -> LiftReport:
    goods, bads = _per_fold_deltas(oof, approved)
    rep = LiftReport(policy=policy, value=value,
                     fold_good_approvals=goods, fold_bad_rejections=bads,
                     mean_good_approvals=float(np.mean(goods)),
                     mean_bad_rejections=float(np.mean(bads)),
                     zero_approval_folds=approved["_zero_folds"])
    if bootstrap_b > 0:
        stat_good, stat_bad = _pooled_delta_stats(oof, approved)
        _, lo, hi = bootstrap_ci(oof.labels, stat_good, b=bootstrap_b, seed=seed)
        rep.ci_good = (lo, hi)
        _, lo, hi = bootstrap_ci(oof.labels, stat_bad, b=bootstrap_b,
                                 seed=seed + 1)
        rep.ci_bad = (lo, hi)
    return rep


def lift_fixed_approval(oof: OofPredictions, r_percent: float,
                        bootstrap_b: int = 0, seed: int = 0) -> LiftReport:
    """Approve the r percent of applicants the model ranks safest."""
    if not 0 < r_percent <= 100:
        raise ValueError("approval rate must lie in (0, 100]")

    def threshold_fn(train_good: np.ndarray, _labels: np.ndarray):
        return _nearest_rank_quantile(train_good, 1.0 - r_percent / 100.0)

    approved = _approval_matrix(oof, threshold_fn)
    return _build_report("fixed_approval", r_percent, oof, approved,
                         bootstrap_b, seed)


def lift_fixed_default(oof: OofPredictions, t_percent: float,
                       bootstrap_b: int = 0, seed: int = 0) -> LiftReport:
    """Approve the largest safety-ranked group whose training-portion default
    rate stays at or below t percent; approve nobody when even the single
    safest training applicant defaults. t = 0 demands a default-free group."""
    if not 0 <= t_percent < 100:
        raise ValueError("default rate must lie in [0, 100)")

    def threshold_fn(train_good: np.ndarray, labels: np.ndarray):
        order = np.argsort(-train_good, kind="stable")
        cum_bad = np.cumsum(labels[order] == 1)
        k = np.arange(1, len(order) + 1)
        ok = np.flatnonzero(cum_bad / k <= t_percent / 100.0)
        if len(ok) == 0:
            return None
        return float(train_good[order[ok[-1]]])

    approved = _approval_matrix(oof, threshold_fn)
    return _build_report("fixed_default", t_percent, oof, approved,
                         bootstrap_b, seed)


def bootstrap_ci(labels, statistic, b: int = 1000,
                 seed: int = 0) -> tuple[float, float, float]:
    """Stratified percentile bootstrap of a statistic over record indices.

    Each resample draws every class with replacement within itself, so class
    composition is preserved exactly. Returns (point estimate on the full
    index set, 2.5th percentile, 97.5th percentile).
    """
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    point = float(statistic(np.arange(n)))
    rng = np.random.default_rng(seed)
    stats = np.empty(b, dtype=np.float64)
    for i in range(b):
        rp = pos[rng.integers(0, len(pos), size=len(pos))] if len(pos) else pos
        rn = neg[rng.integers(0, len(neg), size=len(neg))] if len(neg) else neg
        stats[i] = statistic(np.concatenate([rp, rn]))
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return point, float(lo), float(hi)
