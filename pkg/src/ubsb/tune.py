"""Hyperparameter search nested inside outer folds.

Boosted families use a tree Parzen estimator over 50 sequential trials; the
forest and the single tree use small grids; the elastic net uses a grid over
the mixing weight and penalty strength. All selection happens on a single
stratified 80/20 split of the outer-fold training rows, so the outer held-out
fold never influences the choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dataio import stratified_kfold
from .encode import build_histogram_bins, fit_encoder, transform
from .eval.metrics import roc_auc
from .models import BOOSTED, FAMILIES, encoder_mode, fit_model, predict_proba

TPE_GAMMA = 0.25
TPE_CANDIDATES = 24
TPE_MIN_HISTORY = 10


@dataclass(frozen=True)
class ParamDomain:
    kind: str                      # float | int | cat
    lo: float = 0.0
    hi: float = 0.0
    log: bool = False
    choices: tuple = ()

    def __post_init__(self):
        if self.kind in ("float", "int"):
            if not self.lo < self.hi:
                raise ValueError(f"domain requires lo < hi, got [{self.lo}, {self.hi}]")
            if self.log and self.lo <= 0:
                raise ValueError("log-scale domain must be strictly positive")
        elif self.kind == "cat":
            if len(self.choices) < 1:
                raise ValueError("categorical domain needs at least one choice")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")


def float_param(lo: float, hi: float, log: bool = False) -> ParamDomain:
    return ParamDomain("float", lo=float(lo), hi=float(hi), log=log)


def int_param(lo: int, hi: int) -> ParamDomain:
    return ParamDomain("int", lo=float(lo), hi=float(hi))


def cat_param(*choices) -> ParamDomain:
    return ParamDomain("cat", choices=tuple(choices))


@dataclass(frozen=True)
class SearchSpace:
    params: dict[str, ParamDomain]

    def __post_init__(self):
        if not self.params:
            raise ValueError("empty search space")


@dataclass
class Trial:
    params: dict[str, Any]
    auc: float
    index: int
    n_rounds: int | None = None   # boosted: best_iteration on the inner split


@dataclass
class TuneResult:
    family: str
    best_params: dict[str, Any]
    best_auc: float
    best_rounds: int | None = None
    trials: list[Trial] = field(default_factory=list)


def trials_to_obj(trials: list[Trial]) -> list[dict]:
    return [{"index": t.index, "auc": t.auc, "params": t.params,
             "n_rounds": t.n_rounds} for t in trials]


# ------------------------------------------------------------------ TPE core

def _to_internal(dom: ParamDomain, v: float) -> float:
    return math.log(v) if dom.log else float(v)


def _from_internal(dom: ParamDomain, u: float):
    lo, hi = dom.lo, dom.hi
    if dom.log:
        x = math.exp(min(max(u, math.log(lo)), math.log(hi)))
    else:
        x = min(max(u, lo), hi)
    if dom.kind == "int":
        return int(min(max(round(x), lo), hi))
    return x


def _uniform_draw(dom: ParamDomain, rng: np.random.Generator):
    if dom.kind == "cat":
        return dom.choices[rng.integers(0, len(dom.choices))]
    if dom.kind == "int":
        return int(rng.integers(int(dom.lo), int(dom.hi) + 1))
    if dom.log:
        return math.exp(rng.uniform(math.log(dom.lo), math.log(dom.hi)))
    return rng.uniform(dom.lo, dom.hi)


def _kernel_density(points: np.ndarray, bw: float, x: float) -> float:
    z = (x - points) / bw
    return float(np.mean(np.exp(-0.5 * z * z))) / (bw * math.sqrt(2 * math.pi))


def _cat_probs(values: list, choices: tuple) -> np.ndarray:
    counts = np.ones(len(choices), dtype=np.float64)  # add-one smoothing
    index = {c: i for i, c in enumerate(choices)}
    for v in values:
        counts[index[v]] += 1.0
    return counts / counts.sum()


def tpe_suggest(history: list[Trial], space: SearchSpace,
                rng: np.random.Generator) -> dict[str, Any]:
    """Suggest one assignment. Below TPE_MIN_HISTORY trials this is a uniform
    prior draw; afterwards the top gamma fraction of trials by AUC forms the
    good set, each parameter gets Parzen kernels with bandwidth span/sqrt(n)
    per set, and the best of TPE_CANDIDATES draws from the good density by
    good/bad density ratio is returned."""
    names = list(space.params)
    if len(history) < TPE_MIN_HISTORY:
        return {k: _uniform_draw(space.params[k], rng) for k in names}

    order = sorted(range(len(history)),
                   key=lambda i: (-history[i].auc, history[i].index))
    n_good = max(1, math.ceil(TPE_GAMMA * len(history)))
    good = [history[i] for i in order[:n_good]]
    bad = [history[i] for i in order[n_good:]]

    out: dict[str, Any] = {}
    for name in names:
        dom = space.params[name]
        gv = [t.params[name] for t in good]
        bv = [t.params[name] for t in bad]
        if dom.kind == "cat":
            pg = _cat_probs(gv, dom.choices)
            pb = _cat_probs(bv, dom.choices)
            cand_idx = rng.choice(len(dom.choices), size=TPE_CANDIDATES, p=pg)
            scores = pg[cand_idx] / pb[cand_idx]
            out[name] = dom.choices[int(cand_idx[int(np.argmax(scores))])]
            continue
        span = (math.log(dom.hi) - math.log(dom.lo)) if dom.log else (dom.hi - dom.lo)
        g = np.array([_to_internal(dom, v) for v in gv])
        b = np.array([_to_internal(dom, v) for v in bv])
        # bandwidth shrinks with the full history size, shared by both sets
        bw = span / math.sqrt(len(history))
        centers = g[rng.integers(0, len(g), size=TPE_CANDIDATES)]
        draws = centers + bw * rng.standard_normal(TPE_CANDIDATES)
        best_val, best_score = None, -math.inf
        for u in draws:
            cand = _from_internal(dom, float(u))
            ui = _to_internal(dom, cand)
            dg = _kernel_density(g, bw, ui)
            db = _kernel_density(b, bw, ui) if len(b) else 0.0
            score = dg / max(db, 1e-300)
            if score > best_score:
                best_val, best_score = cand, score
        out[name] = best_val
    return out


# ------------------------------------------------------- spaces and grids

def default_space(family: str) -> SearchSpace:
    if family not in BOOSTED:
        raise ValueError(f"no TPE space for family {family!r}")
    params = {
        "learning_rate": float_param(0.01, 0.3, log=True),
        "l1_alpha": float_param(1e-3, 10.0, log=True),
        "l2_lambda": float_param(1e-3, 10.0, log=True),
    }
    if family == "gbdt_lgbm":
        params["max_leaves"] = int_param(15, 63)
        # GOSS already subsamples rows, so the free axis is column fraction
        params["col_subsample"] = float_param(0.6, 1.0)
    else:
        params["max_depth"] = int_param(4, 10)
        params["row_subsample"] = float_param(0.6, 1.0)
    return SearchSpace(params)


def default_grid(family: str) -> list[dict[str, Any]]:
    if family == "rforest":
        return [{"max_depth": d, "mtry": m}
                for d in (8, 12) for m in ("sqrt", "third")]
    if family == "dtree":
        return [{"max_depth": d} for d in (4, 6, 8)]
    if family == "logreg":
        return [{"alpha_mix": a, "lam": l}
                for a in (0.15, 0.5, 0.85)
                for l in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)]
    raise ValueError(f"no default grid for family {family!r}")


# ------------------------------------------------------------ inner protocol

@dataclass
class InnerSplit:
    encoder: object
    train_matrix: object
    train_labels: np.ndarray
    val_matrix: object
    val_labels: np.ndarray
    bins: list[np.ndarray] | None


def make_inner_split(table, labels, family: str, inner_frac: float = 0.2,
                     seed: int = 0) -> InnerSplit:
    """Stratified single split of the outer-train rows; the encoder and the
    histogram bins are fit on the inner-train portion only."""
    y = np.asarray(labels, dtype=np.int64)
    k = max(2, round(1.0 / inner_frac))
    plan = stratified_kfold(y, k, seed)
    tr = plan.train_indices(0)
    va = plan.test_indices(0)
    enc = fit_encoder(table.subset(tr), mode=encoder_mode(family))
    mt = transform(enc, table.subset(tr))
    mv = transform(enc, table.subset(va))
    bins = build_histogram_bins(mt) if family != "logreg" else None
    return InnerSplit(encoder=enc, train_matrix=mt, train_labels=y[tr],
                      val_matrix=mv, val_labels=y[va], bins=bins)


def _eval_assignment(split: InnerSplit, family: str, params: dict,
                     seed: int) -> tuple[float, int | None]:
    model = fit_model(family, split.train_matrix, split.train_labels, params,
                      split.encoder, seed=seed, val_matrix=split.val_matrix,
                      val_labels=split.val_labels, bins=split.bins)
    probs = predict_proba(model, split.val_matrix)
    return roc_auc(probs, split.val_labels), model.best_iteration


def nested_tune(table, labels, family: str, space: SearchSpace | None = None,
                n_trials: int = 50, inner_frac: float = 0.2,
                seed: int = 0) -> TuneResult:
    """TPE search for a boosted family on the outer-train rows only."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family name {family!r}")
    if space is None:
        space = default_space(family)
    split = make_inner_split(table, labels, family, inner_frac, seed)
    trials: list[Trial] = []
    best: Trial | None = None
    for t in range(n_trials):
        rng = np.random.default_rng([seed, t])
        params = tpe_suggest(trials, space, rng)
        auc, rounds = _eval_assignment(split, family, params,
                                       seed=seed * 1_000_003 + t)
        trial = Trial(params=params, auc=auc, index=t, n_rounds=rounds)
        trials.append(trial)
        if best is None or trial.auc > best.auc:
            best = trial
    return TuneResult(family=family, best_params=dict(best.params),
                      best_auc=best.auc, best_rounds=best.n_rounds,
                      trials=trials)


def grid_search(table, labels, family: str,
                grid: list[dict[str, Any]] | None = None,
                inner_frac: float = 0.2, seed: int = 0) -> TuneResult:
    """Exhaustive search over a finite grid; AUC ties keep the earlier entry."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family name {family!r}")
    if grid is None:
        grid = default_grid(family)
    if not grid:
        raise ValueError("empty grid")
    split = make_inner_split(table, labels, family, inner_frac, seed)
    trials: list[Trial] = []
    best: Trial | None = None
    for t, params in enumerate(grid):
        auc, rounds = _eval_assignment(split, family, params,
                                       seed=seed * 1_000_003 + t)
        trial = Trial(params=dict(params), auc=auc, index=t, n_rounds=rounds)
        trials.append(trial)
        if best is None or trial.auc > best.auc:
            best = trial
    return TuneResult(family=family, best_params=dict(best.params),
                      best_auc=best.auc, best_rounds=best.n_rounds,
                      trials=trials)
