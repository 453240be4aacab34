"""Single CART classifier: weighted-Gini growth to a depth cap, then
cost-complexity pruning with the penalty picked by stratified inner CV."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataio import stratified_kfold
from ..encode import FeatureMatrix, bin_matrix, build_histogram_bins
from ..eval.metrics import weighted_logloss
from .trees import TreeArrays, gini_tree


@dataclass
class PrunedTree:
    tree: TreeArrays
    ccp_alpha: float
    alpha_candidates: list[float] = field(default_factory=list)
    cv_losses: list[float] = field(default_factory=list)


def _reachable(tree: TreeArrays, leaf_mask: np.ndarray) -> np.ndarray:
    keep = np.zeros(tree.n_nodes, dtype=bool)
    stack = [0]
    while stack:
        i = stack.pop()
        keep[i] = True
        if not leaf_mask[i]:
            stack.append(int(tree.left[i]))
            stack.append(int(tree.right[i]))
    return keep


def _node_risk(tree: TreeArrays, w_root: float) -> np.ndarray:
    """Per-node weighted Gini risk: share of total mass times node impurity."""
    wp, wn = tree.w_pos, tree.w_neg
    wt = wp + wn
    risk = np.zeros(tree.n_nodes, dtype=np.float64)
    nz = wt > 0
    risk[nz] = 2.0 * wp[nz] * wn[nz] / wt[nz] / w_root
    return risk


def ccp_alpha_path(tree: TreeArrays) -> list[tuple[float, np.ndarray]]:
    """Weakest-link pruning sequence: (alpha, leaf mask) states from the full
    tree to the root collapse. All nodes attaining the minimal link strength
    are collapsed together, so the alpha sequence is nondecreasing."""
    if tree.n_nodes == 1:
        return [(0.0, tree.is_leaf.copy())]
    w_root = float(tree.w_pos[0] + tree.w_neg[0])
    if w_root <= 0:
        return [(0.0, tree.is_leaf.copy())]
    risk = _node_risk(tree, w_root)
    leaf = tree.is_leaf.copy()
    states = [(0.0, leaf.copy())]
    # children always carry higher ids than their parent, so a single reverse
    # pass yields bottom-up subtree aggregates
    order = np.arange(tree.n_nodes - 1, -1, -1)
    while not leaf[0]:
        sub_risk = np.zeros(tree.n_nodes)
        sub_leaves = np.zeros(tree.n_nodes, dtype=np.int64)
        g = np.full(tree.n_nodes, math.inf)
        for i in order:
            if leaf[i]:
                sub_risk[i] = risk[i]
                sub_leaves[i] = 1
            else:
                l, r = tree.left[i], tree.right[i]
                sub_risk[i] = sub_risk[l] + sub_risk[r]
                sub_leaves[i] = sub_leaves[l] + sub_leaves[r]
                g[i] = (risk[i] - sub_risk[i]) / (sub_leaves[i] - 1)
        reach = _reachable(tree, leaf)
        g[~reach] = math.inf
        g[leaf] = math.inf
        alpha = float(g.min())
        leaf = leaf | (g == alpha)
        states.append((max(alpha, 0.0), leaf.copy()))
    return states


def collapse_tree(tree: TreeArrays, leaf_mask: np.ndarray) -> TreeArrays:
    """Repack with the given nodes treated as leaves; unreachable nodes drop."""
    order: dict[int, int] = {0: 0}
    queue = [0]
    while queue:
        i = queue.pop(0)
        if not leaf_mask[i]:
            for child in (int(tree.left[i]), int(tree.right[i])):
                order[child] = len(order)
                queue.append(child)
    old = np.fromiter(order.keys(), dtype=np.int64)
    n = len(old)
    remap = {o: nw for o, nw in order.items()}
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    col = np.full(n, -1, dtype=np.int64)
    bins = np.full(n, -1, dtype=np.int64)
    for o, nw in order.items():
        if not leaf_mask[o]:
            left[nw] = remap[int(tree.left[o])]
            right[nw] = remap[int(tree.right[o])]
            col[nw] = tree.col[o]
            bins[nw] = tree.bin[o]
    return TreeArrays(
        col=col, bin=bins, thr=tree.thr[old].copy(),
        left=left, right=right, value=tree.value[old].copy(),
        is_leaf=leaf_mask[old].copy(),
        w_pos=tree.w_pos[old].copy(), w_neg=tree.w_neg[old].copy(),
    )


def _state_at(path: list[tuple[float, np.ndarray]], alpha: float) -> np.ndarray:
    chosen = path[0][1]
    for a, mask in path:
        if a <= alpha:
            chosen = mask
        else:
            break
    return chosen


def _candidate_alphas(path: list[tuple[float, np.ndarray]]) -> list[float]:
    alphas = sorted({a for a, _ in path})
    if len(alphas) == 1:
        return [0.0]
    cands = [0.0]
    for a, b in zip(alphas, alphas[1:]):
        cands.append(math.sqrt(a * b) if a > 0 else 0.0)
    cands.append(2.0 * alphas[-1])
    return sorted(set(cands))


def fit_decision_tree(
    matrix: FeatureMatrix,
    labels,
    weights,
    max_depth: int = 8,
    cv_folds: int = 5,
    seed: int = 0,
    bins: list[np.ndarray] | None = None,
) -> PrunedTree:
    """Grow the depth-capped tree on all rows (zero-gain splits allowed, so
    patterns like XOR resolve), then prune at the alpha minimizing mean
    weighted log-loss over stratified inner folds. Pruning is skipped when
    either class has fewer rows than cv_folds, since the inner split would
    be degenerate."""
    y = np.asarray(labels, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    n = len(y)
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} does not match {n} rows")
    n_pos = int((y == 1).sum())
    if n_pos == 0 or n_pos == n:
        raise ValueError("fit_decision_tree: both classes must be present")
    if bins is None:
        bins = build_histogram_bins(matrix)
    n_bins = np.array([len(e) + 1 for e in bins], dtype=np.int64)
    binned = np.ascontiguousarray(bin_matrix(matrix, bins))

    main = gini_tree(
        binned, n_bins, y, w, np.arange(n, dtype=np.int64), bins,
        max_depth=max_depth, accept_zero_gain=True,
    )
    path = ccp_alpha_path(main)
    candidates = _candidate_alphas(path)
    if len(candidates) == 1 or min(n_pos, n - n_pos) < cv_folds:
        return PrunedTree(tree=collapse_tree(main, path[0][1]), ccp_alpha=0.0,
                          alpha_candidates=candidates)

    plan = stratified_kfold(y, cv_folds, seed)
    losses = np.zeros(len(candidates))
    for f in range(cv_folds):
        tr = plan.train_indices(f)
        te = plan.test_indices(f)
        fold_tree = gini_tree(
            binned, n_bins, y, w, tr.astype(np.int64), bins,
            max_depth=max_depth, accept_zero_gain=True,
        )
        fold_path = ccp_alpha_path(fold_tree)
        binned_te = np.ascontiguousarray(binned[te])
        for ci, alpha in enumerate(candidates):
            pruned = TreeArrays(
                col=fold_tree.col, bin=fold_tree.bin, thr=fold_tree.thr,
                left=fold_tree.left, right=fold_tree.right,
                value=fold_tree.value, is_leaf=_state_at(fold_path, alpha),
            )
            probs = pruned.apply_binned(binned_te)
            losses[ci] += weighted_logloss(probs, y[te], w[te])
    losses /= cv_folds
    best = int(np.argmin(losses))    # ties resolve to the smallest alpha
    alpha_star = candidates[best]
    final = collapse_tree(main, _state_at(path, alpha_star))
    return PrunedTree(
        tree=final, ccp_alpha=alpha_star,
        alpha_candidates=[float(a) for a in candidates],
        cv_losses=[float(v) for v in losses],
    )
