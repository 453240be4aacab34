"""Model families behind a single TrainedModel wrapper.

Families: gbdt_xgb, gbdt_lgbm, gbdt_cat (one boosted engine, three presets),
rforest, dtree, logreg. fit_model dispatches on the family tag; predict_proba
checks that the matrix was produced by the model's own encoder before scoring.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..encode import ColumnSpec, EncoderState, FeatureMatrix
from .dtree import PrunedTree, fit_decision_tree
from .forest import Forest, fit_random_forest
from .gbdt import (
    GbdtEnsemble,
    GbdtParams,
    cat_like_params,
    fit_gbdt,
    lgbm_like_params,
    xgb_like_params,
)
from .linear import LinearModel, fit_logreg_elasticnet
from .losses import clamp_probs, class_weight_vector, sigmoid
from .trees import TreeArrays

FAMILIES = ("gbdt_xgb", "gbdt_lgbm", "gbdt_cat", "rforest", "dtree", "logreg")
BOOSTED = ("gbdt_xgb", "gbdt_lgbm", "gbdt_cat")

_PRESET_FN = {
    "gbdt_xgb": xgb_like_params,
    "gbdt_lgbm": lgbm_like_params,
    "gbdt_cat": cat_like_params,
}


@dataclass
class TrainedModel:
    family: str
    params: dict[str, Any]
    structure: GbdtEnsemble | Forest | PrunedTree | LinearModel
    encoder: EncoderState
    trace: list[float] = field(default_factory=list)
    best_iteration: int | None = None
    converged: bool | None = None
    threshold: float | None = None


def encoder_mode(family: str) -> str:
    return "linear" if family == "logreg" else "tree"


def fit_model(
    family: str,
    matrix: FeatureMatrix,
    labels,
    params: dict[str, Any],
    encoder: EncoderState,
    seed: int = 0,
    val_matrix: FeatureMatrix | None = None,
    val_labels=None,
    bins: list[np.ndarray] | None = None,
) -> TrainedModel:
    if family not in FAMILIES:
        raise ValueError(f"unknown family name {family!r}")
    y = np.asarray(labels, dtype=np.int64)

    if family in BOOSTED:
        if val_matrix is None or val_labels is None:
            raise ValueError(f"{family} requires a validation split for early stopping")
        gp = _PRESET_FN[family](**params)
        ensemble, trace = fit_gbdt(matrix, y, gp, val_matrix, val_labels,
                                   seed=seed, bins=bins)
        return TrainedModel(family=family, params=dict(params), structure=ensemble,
                            encoder=encoder, trace=trace,
                            best_iteration=ensemble.best_iteration)

    if family == "rforest":
        forest = fit_random_forest(matrix, y, seed=seed, bins=bins, **params)
        return TrainedModel(family=family, params=dict(params), structure=forest,
                            encoder=encoder)

    w = class_weight_vector(y)
    if family == "dtree":
        pruned = fit_decision_tree(matrix, y, w, seed=seed, bins=bins, **params)
        return TrainedModel(family=family, params=dict(params), structure=pruned,
                            encoder=encoder)

    lin = fit_logreg_elasticnet(matrix, y, w, **params)
    return TrainedModel(family=family, params=dict(params), structure=lin,
                        encoder=encoder, converged=lin.converged)


def predict_proba(model: TrainedModel, matrix: FeatureMatrix) -> np.ndarray:
    enc = model.encoder
    if (matrix.feature_set_name != enc.feature_set_name
            or tuple(matrix.names) != tuple(enc.feature_names)):
        raise ValueError(
            f"matrix features {matrix.feature_set_name!r}/{len(matrix.names)} cols do not "
            f"match the model encoder {enc.feature_set_name!r}/{len(enc.feature_names)} cols")
    x = np.ascontiguousarray(matrix.values, dtype=np.float64)
    s = model.structure
    if isinstance(s, GbdtEnsemble):
        return sigmoid(s.margins(x))
    if isinstance(s, Forest):
        return clamp_probs(s.predict_raw(x))
    if isinstance(s, PrunedTree):
        return clamp_probs(s.tree.apply_raw(x))
    return sigmoid(s.margins(x))


# ---------------------------------------------------------------- JSON form

def _tree_to_obj(t: TreeArrays) -> dict:
    return {
        "col": t.col.tolist(), "bin": t.bin.tolist(), "thr": t.thr.tolist(),
        "left": t.left.tolist(), "right": t.right.tolist(),
        "value": t.value.tolist(), "is_leaf": t.is_leaf.tolist(),
        "w_pos": t.w_pos.tolist(), "w_neg": t.w_neg.tolist(),
    }


def _tree_from_obj(o: dict) -> TreeArrays:
    return TreeArrays(
        col=np.array(o["col"], dtype=np.int64),
        bin=np.array(o["bin"], dtype=np.int64),
        thr=np.array(o["thr"], dtype=np.float64),
        left=np.array(o["left"], dtype=np.int64),
        right=np.array(o["right"], dtype=np.int64),
        value=np.array(o["value"], dtype=np.float64),
        is_leaf=np.array(o["is_leaf"], dtype=bool),
        w_pos=np.array(o["w_pos"], dtype=np.float64),
        w_neg=np.array(o["w_neg"], dtype=np.float64),
    )


def _encoder_to_obj(enc: EncoderState) -> dict:
    return {
        "mode": enc.mode,
        "feature_set_name": enc.feature_set_name,
        "source_columns": list(enc.source_columns),
        "reference_date": enc.reference_date.isoformat(),
        "feature_names": list(enc.feature_names),
        "specs": [
            {"name": s.name, "source": s.source, "kind": s.kind,
             "levels": list(s.levels), "ordinal": s.ordinal,
             "mean": s.mean, "std": s.std}
            for s in enc.specs
        ],
    }


def _encoder_from_obj(o: dict) -> EncoderState:
    return EncoderState(
        mode=o["mode"],
        feature_set_name=o["feature_set_name"],
        source_columns=tuple(o["source_columns"]),
        reference_date=datetime.date.fromisoformat(o["reference_date"]),
        specs=tuple(
            ColumnSpec(name=s["name"], source=s["source"], kind=s["kind"],
                       levels=tuple(s["levels"]), ordinal=s["ordinal"],
                       mean=s["mean"], std=s["std"])
            for s in o["specs"]
        ),
        feature_names=tuple(o["feature_names"]),
    )


def model_to_obj(model: TrainedModel) -> dict:
    s = model.structure
    if isinstance(s, GbdtEnsemble):
        structure = {"kind": "gbdt", "base_margin": s.base_margin,
                     "best_iteration": s.best_iteration,
                     "trees": [_tree_to_obj(t) for t in s.trees]}
    elif isinstance(s, Forest):
        structure = {"kind": "forest", "oob_auc": s.oob_auc,
                     "trees": [_tree_to_obj(t) for t in s.trees]}
    elif isinstance(s, PrunedTree):
        structure = {"kind": "dtree", "ccp_alpha": s.ccp_alpha,
                     "alpha_candidates": list(s.alpha_candidates),
                     "cv_losses": list(s.cv_losses),
                     "tree": _tree_to_obj(s.tree)}
    else:
        structure = {"kind": "linear", "coef": s.coef.tolist(),
                     "intercept": s.intercept, "converged": s.converged,
                     "n_iter": s.n_iter}
    return {
        "family": model.family,
        "params": model.params,
        "structure": structure,
        "encoder": _encoder_to_obj(model.encoder),
        "trace": list(model.trace),
        "best_iteration": model.best_iteration,
        "converged": model.converged,
        "threshold": model.threshold,
    }


def model_from_obj(o: dict) -> TrainedModel:
    so = o["structure"]
    kind = so["kind"]
    if kind == "gbdt":
        structure = GbdtEnsemble(base_margin=so["base_margin"],
                                 trees=[_tree_from_obj(t) for t in so["trees"]],
                                 best_iteration=so["best_iteration"])
    elif kind == "forest":
        structure = Forest(trees=[_tree_from_obj(t) for t in so["trees"]],
                           oob_auc=so["oob_auc"])
    elif kind == "dtree":
        structure = PrunedTree(tree=_tree_from_obj(so["tree"]),
                               ccp_alpha=so["ccp_alpha"],
                               alpha_candidates=list(so["alpha_candidates"]),
                               cv_losses=list(so["cv_losses"]))
    elif kind == "linear":
        structure = LinearModel(coef=np.array(so["coef"], dtype=np.float64),
                                intercept=so["intercept"],
                                converged=so["converged"], n_iter=so["n_iter"])
    else:
        raise ValueError(f"unknown structure kind {kind!r}")
    return TrainedModel(
        family=o["family"], params=o["params"], structure=structure,
        encoder=_encoder_from_obj(o["encoder"]), trace=list(o["trace"]),
        best_iteration=o["best_iteration"], converged=o["converged"],
        threshold=o["threshold"],
    )


__all__ = [
    "BOOSTED", "FAMILIES", "Forest", "GbdtEnsemble", "GbdtParams",
    "LinearModel", "PrunedTree", "TrainedModel", "TreeArrays",
    "cat_like_params", "encoder_mode", "fit_decision_tree", "fit_gbdt",
    "fit_logreg_elasticnet", "fit_model", "fit_random_forest",
    "lgbm_like_params", "model_from_obj", "model_to_obj", "predict_proba",
    "xgb_like_params",
]
