"""Demo-vs-Full ablation harness.

For every model family and both feature sets, each outer fold is tuned on
its own training partition (TPE for boosted families, grid otherwise),
refit, and scored on the held-out fold. A classification threshold is chosen
per fold from the training portion only. Metrics are reported as per-fold
means with pooled out-of-fold values alongside, plus a paired DeLong test of
the Full-vs-Demo AUC gap on the pooled predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ..dataio import Dataset, FoldPlan, demo_features, feature_view, full_features, stratified_kfold
from ..encode import fit_encoder, transform
from ..models import BOOSTED, FAMILIES, GbdtEnsemble, encoder_mode, fit_model, predict_proba
from ..tune import TuneResult, grid_search, nested_tune, trials_to_obj
from .delong import DeLongResult, delong_paired
from .metrics import precision_recall_f1, roc_auc, select_threshold_max_f1

VARIANTS = ("Demo", "Full")


@dataclass
class OofPredictions:
    """Pooled out-of-fold scores, one row per record, both variants from the
    same fold plan."""
    family: str
    ids: np.ndarray
    labels: np.ndarray
    fold_index: np.ndarray
    demo_score: np.ndarray
    full_score: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    def n_folds(self) -> int:
        return int(self.fold_index.max()) + 1

    def variant_scores(self, variant: str) -> np.ndarray:
        if variant == "Demo":
            return self.demo_score
        if variant == "Full":
            return self.full_score
        raise ValueError(f"unknown variant {variant!r}")

    def to_obj(self) -> dict:
        return {
            "family": self.family,
            "ids": self.ids.tolist(),
            "labels": self.labels.tolist(),
            "fold_index": self.fold_index.tolist(),
            "demo_score": self.demo_score.tolist(),
            "full_score": self.full_score.tolist(),
        }

    @classmethod
    def from_obj(cls, o: dict) -> "OofPredictions":
        return cls(
            family=o["family"],
            ids=np.array(o["ids"], dtype=np.int64),
            labels=np.array(o["labels"], dtype=np.int64),
            fold_index=np.array(o["fold_index"], dtype=np.int64),
            demo_score=np.array(o["demo_score"], dtype=np.float64),
            full_score=np.array(o["full_score"], dtype=np.float64),
        )


@dataclass
class VariantMetrics:
    variant: str
    fold_auc: list[float] = field(default_factory=list)
    fold_precision: list[float] = field(default_factory=list)
    fold_recall: list[float] = field(default_factory=list)
    fold_f1: list[float] = field(default_factory=list)
    fold_threshold: list[float] = field(default_factory=list)
    fold_params: list[dict[str, Any]] = field(default_factory=list)
    fold_rounds: list[int | None] = field(default_factory=list)
    pooled_auc: float = 0.0
    pooled_precision: float = 0.0
    pooled_recall: float = 0.0
    pooled_f1: float = 0.0

    def mean(self, values: list[float]) -> float:
        return float(np.mean(values))

    def to_obj(self) -> dict:
        return {
            "variant": self.variant,
            "auc": self.mean(self.fold_auc),
            "precision": self.mean(self.fold_precision),
            "recall": self.mean(self.fold_recall),
            "f1": self.mean(self.fold_f1),
            "fold_auc": self.fold_auc,
            "fold_precision": self.fold_precision,
            "fold_recall": self.fold_recall,
            "fold_f1": self.fold_f1,
            "fold_threshold": self.fold_threshold,
            "fold_params": self.fold_params,
            "fold_rounds": self.fold_rounds,
            "pooled_auc": self.pooled_auc,
            "pooled_precision": self.pooled_precision,
            "pooled_recall": self.pooled_recall,
            "pooled_f1": self.pooled_f1,
        }


@dataclass
class FamilyResult:
    family: str
    oof: OofPredictions
    demo: VariantMetrics
    full: VariantMetrics
    delong: DeLongResult
    tuning: dict[str, list[dict]] = field(default_factory=dict)

    def variant(self, name: str) -> VariantMetrics:
        return self.demo if name == "Demo" else self.full


@dataclass
class AblationReport:
    results: list[FamilyResult]
    n_folds: int
    seed: int

    def csv_rows(self) -> list[dict[str, Any]]:
        rows = []
        for fr in self.results:
            for vm in (fr.demo, fr.full):
                rows.append({
                    "Model": fr.family,
                    "Variant": vm.variant,
                    "AUC": vm.mean(vm.fold_auc),
                    "F1": vm.mean(vm.fold_f1),
                    "Precision": vm.mean(vm.fold_precision),
                    "Recall": vm.mean(vm.fold_recall),
                    "PooledAUC": vm.pooled_auc,
                    "PooledF1": vm.pooled_f1,
                })
        return rows

    def to_obj(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "seed": self.seed,
            "families": [
                {
                    "family": fr.family,
                    "demo": fr.demo.to_obj(),
                    "full": fr.full.to_obj(),
                    "delong": {
                        "auc_demo": fr.delong.auc_a,
                        "auc_full": fr.delong.auc_b,
                        "delta": fr.delong.delta,
                        "var_delta": fr.delong.var_delta,
                        "z": fr.delong.z,
                        "p_value": fr.delong.p_value,
                        "degenerate": fr.delong.degenerate,
                    },
                }
                for fr in self.results
            ],
        }


def check_fold_stratification(plan: FoldPlan, labels: np.ndarray) -> None:
    """Fold sizes and positive counts may differ by at most one record."""
    sizes, pos = [], []
    for f in range(plan.k):
        te = plan.test_indices(f)
        sizes.append(len(te))
        pos.append(int(labels[te].sum()))
    if max(sizes) - min(sizes) > 1:
        raise AssertionError(f"fold sizes unbalanced: {sizes}")
    if max(pos) - min(pos) > 1:
        raise AssertionError(f"fold positives unbalanced: {pos}")


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _refit_outer(family: str, table, y, tr, seed: int, tune_res: TuneResult):
    """Refit on the full outer-train rows with the tuned parameters."""
    enc = fit_encoder(table.subset(tr), mode=encoder_mode(family))
    mt = transform(enc, table.subset(tr))
    if family in BOOSTED:
        # early stopping already chose the round count on the inner split;
        # rerun for exactly that many rounds on all outer-train rows
        rounds = max(1, int(tune_res.best_rounds or 1))
        params = dict(tune_res.best_params)
        params["n_rounds_max"] = rounds
        params["early_stopping_rounds"] = rounds + 1
        model = fit_model(family, mt, y[tr], params, enc, seed=seed,
                          val_matrix=mt, val_labels=y[tr])
        assert isinstance(model.structure, GbdtEnsemble)
        model.structure.best_iteration = len(model.structure.trees)
        model.best_iteration = model.structure.best_iteration
    else:
        model = fit_model(family, mt, y[tr], tune_res.best_params, enc, seed=seed)
    return model, mt


def run_ablation(
    dataset: Dataset,
    families: list[str] | None = None,
    n_folds: int = 5,
    n_trials: int = 50,
    seed: int = 0,
    progress=None,
    model_sink=None,
) -> AblationReport:
    if families is None:
        families = list(FAMILIES)
    for fam in families:
        if fam not in FAMILIES:
            raise ValueError(f"unknown family name {fam!r}")
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    labels = np.asarray(dataset.labels, dtype=np.int64)
    plan = stratified_kfold(labels, n_folds, seed)
    check_fold_stratification(plan, labels)

    feature_sets = {"Demo": demo_features(), "Full": full_features()}
    results: list[FamilyResult] = []
    for fi, family in enumerate(families):
        oof = OofPredictions(
            family=family,
            ids=dataset.columns["id"].copy(),
            labels=labels.copy(),
            fold_index=np.full(dataset.n, -1, dtype=np.int64),
            demo_score=np.zeros(dataset.n, dtype=np.float64),
            full_score=np.zeros(dataset.n, dtype=np.float64),
        )
        metrics = {v: VariantMetrics(variant=v) for v in VARIANTS}
        tuning: dict[str, list[dict]] = {v: [] for v in VARIANTS}
        for vi, variant in enumerate(VARIANTS):
            table, y = feature_view(dataset, feature_sets[variant])
            scores = oof.variant_scores(variant)
            for f in range(n_folds):
                tr = plan.train_indices(f)
                te = plan.test_indices(f)
                fold_seed = _derive_seed(seed, fi, vi, f)
                if family in BOOSTED:
                    tune_res = nested_tune(table.subset(tr), y[tr], family,
                                           n_trials=n_trials, seed=fold_seed)
                else:
                    tune_res = grid_search(table.subset(tr), y[tr], family,
                                           seed=fold_seed)
                model, mt = _refit_outer(family, table, y, tr, fold_seed, tune_res)
                train_scores = predict_proba(model, mt)
                threshold = select_threshold_max_f1(train_scores, y[tr])
                if model_sink is not None:
                    model_sink(family, variant, f, model, float(threshold))
                te_scores = predict_proba(model, transform(model.encoder,
                                                           table.subset(te)))
                scores[te] = te_scores
                oof.fold_index[te] = f
                vm = metrics[variant]
                vm.fold_auc.append(roc_auc(te_scores, y[te]))
                pr = precision_recall_f1((te_scores > threshold).astype(np.int64), y[te])
                vm.fold_precision.append(pr.precision)
                vm.fold_recall.append(pr.recall)
                vm.fold_f1.append(pr.f1)
                vm.fold_threshold.append(float(threshold))
                vm.fold_params.append(dict(tune_res.best_params))
                vm.fold_rounds.append(tune_res.best_rounds)
                tuning[variant].append({"fold": f, "trials": trials_to_obj(tune_res.trials)})
                if progress is not None:
                    progress(family, variant, f, vm.fold_auc[-1])
            vm = metrics[variant]
            vm.pooled_auc = roc_auc(scores, labels)
            thr = np.array(vm.fold_threshold)[oof.fold_index]
            pr = precision_recall_f1((scores > thr).astype(np.int64), labels)
            vm.pooled_precision = pr.precision
            vm.pooled_recall = pr.recall
            vm.pooled_f1 = pr.f1
        dl = delong_paired(oof.demo_score, oof.full_score, labels)
        results.append(FamilyResult(family=family, oof=oof,
                                    demo=metrics["Demo"], full=metrics["Full"],
                                    delong=dl, tuning=tuning))
    return AblationReport(results=results, n_folds=n_folds, seed=seed)
