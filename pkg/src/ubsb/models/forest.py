"""Random forest over binned columns with class-balanced bootstraps.

Each tree draws n/2 positives and n/2 negatives with replacement, samples
sqrt(p) candidate columns per node, and predicts a leaf positive fraction;
the forest prediction is the plain mean over trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..encode import FeatureMatrix, bin_matrix, build_histogram_bins
from .trees import TreeArrays, gini_tree


@dataclass
class Forest:
    trees: list[TreeArrays] = field(default_factory=list)
    oob_auc: float | None = None

    def predict_raw(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(values.shape[0], dtype=np.float64)
        x = np.ascontiguousarray(values, dtype=np.float64)
        for tree in self.trees:
            out += tree.apply_raw(x)
        return out / len(self.trees)


def _mtry_count(mtry: str | int, p: int) -> int:
    if isinstance(mtry, int):
        return max(1, min(mtry, p))
    if mtry == "sqrt":
        return max(1, int(round(math.sqrt(p))))
    if mtry == "third":
        return max(1, p // 3)
    if mtry == "all":
        return p
    raise ValueError(f"unknown mtry rule {mtry!r}")


def fit_random_forest(
    matrix: FeatureMatrix,
    labels,
    n_trees: int = 500,
    max_depth: int = 12,
    mtry: str | int = "sqrt",
    seed: int = 0,
    compute_oob: bool = False,
    bins: list[np.ndarray] | None = None,
) -> Forest:
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    pos_idx = np.flatnonzero(y == 1)
    neg_idx = np.flatnonzero(y == 0)
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        raise ValueError("fit_random_forest: both classes must be present")
    if bins is None:
        bins = build_histogram_bins(matrix)
    n_bins = np.array([len(e) + 1 for e in bins], dtype=np.int64)
    binned = np.ascontiguousarray(bin_matrix(matrix, bins))
    p = binned.shape[1]
    k = _mtry_count(mtry, p)
    w = np.ones(n, dtype=np.float64)
    half = max(1, n // 2)

    forest = Forest()
    oob_sum = np.zeros(n, dtype=np.float64)
    oob_cnt = np.zeros(n, dtype=np.int64)
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        boot_pos = pos_idx[rng.integers(0, len(pos_idx), size=half)]
        boot_neg = neg_idx[rng.integers(0, len(neg_idx), size=half)]
        idx = np.concatenate([boot_pos, boot_neg])
        node_seed = (seed * 1000003 + t) % 2147483647
        tree = gini_tree(
            binned, n_bins, y, w, idx, bins,
            max_depth=max_depth, mtry=k if k < p else None, seed=node_seed,
        )
        forest.trees.append(tree)
        if compute_oob:
            in_bag = np.zeros(n, dtype=bool)
            in_bag[idx] = True
            oob = np.flatnonzero(~in_bag)
            if len(oob):
                oob_sum[oob] += tree.apply_binned(np.ascontiguousarray(binned[oob]))
                oob_cnt[oob] += 1

    if compute_oob:
        scored = oob_cnt > 0
        ys = y[scored]
        if len(np.unique(ys)) == 2:
            from ..eval.metrics import roc_auc

            forest.oob_auc = roc_auc(oob_sum[scored] / oob_cnt[scored], ys)
    return forest
