"""One histogram-boosting engine, three regime presets.

xgb_like grows depth-wise with row/column subsampling and both penalties;
lgbm_like grows best-leaf-first to a leaf cap with gradient-based one-side
sampling; cat_like grows symmetric (oblivious) levels under Bernoulli row
subsampling. Early stopping watches validation AUC with a fixed patience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..encode import FeatureMatrix, bin_matrix, build_histogram_bins
from ..eval.metrics import roc_auc
from .losses import class_weights, clamp_probs, logistic_grad_hess, sigmoid
from .trees import (
    TreeArrays,
    attach_thresholds,
    best_gain_split,
    hist_by_node,
    hist_grad_hess,
    leaf_weight,
    route_level,
    subtract_sibling,
    symmetric_gain_surface,
    symmetric_side_sums,
)

PRESETS = ("xgb_like", "lgbm_like", "cat_like")


@dataclass(frozen=True)
class GbdtParams:
    preset: str
    learning_rate: float = 0.1
    max_depth: int = 6
    max_leaves: int = 31
    n_rounds_max: int = 300
    early_stopping_rounds: int = 100
    row_subsample: float = 1.0
    col_subsample: float = 1.0
    l1_alpha: float = 0.0
    l2_lambda: float = 1.0
    min_gain_gamma: float = 0.0
    goss: bool = False
    goss_a: float = 0.2
    goss_b: float = 0.1
    class_weighting: bool = True
    max_bins: int = 255

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if not (0.0 <= self.learning_rate <= 1.0):
            raise ValueError("learning_rate must be in [0, 1]")
        for name in ("row_subsample", "col_subsample"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]")
        if self.goss and not (0.0 < self.goss_a + self.goss_b <= 1.0):
            raise ValueError("goss fractions must satisfy 0 < a + b <= 1")
        if self.max_depth < 1 or self.max_leaves < 2:
            raise ValueError("max_depth >= 1 and max_leaves >= 2 required")
        if self.n_rounds_max < 1 or self.early_stopping_rounds < 1:
            raise ValueError("round counts must be >= 1")
        if not (2 <= self.max_bins <= 255):
            raise ValueError("max_bins must be in [2, 255]")
        if self.l1_alpha < 0 or self.l2_lambda < 0 or self.min_gain_gamma < 0:
            raise ValueError("penalties must be >= 0")


def xgb_like_params(**overrides) -> GbdtParams:
    base = GbdtParams(
        preset="xgb_like", row_subsample=0.8, col_subsample=0.8,
        l1_alpha=0.1, l2_lambda=1.0,
    )
    return replace(base, **overrides)


def lgbm_like_params(**overrides) -> GbdtParams:
    base = GbdtParams(
        preset="lgbm_like", goss=True, goss_a=0.2, goss_b=0.1,
        max_leaves=31, max_depth=16, l2_lambda=1.0,
    )
    return replace(base, **overrides)


def cat_like_params(**overrides) -> GbdtParams:
    base = GbdtParams(
        preset="cat_like", row_subsample=0.8, max_depth=6, l2_lambda=3.0,
    )
    return replace(base, **overrides)


@dataclass
class GbdtEnsemble:
    base_margin: float
    trees: list[TreeArrays] = field(default_factory=list)
    best_iteration: int = 0

    def margins(self, values: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        use = self.best_iteration if n_trees is None else n_trees
        out = np.full(values.shape[0], self.base_margin, dtype=np.float64)
        for tree in self.trees[:use]:
            out += tree.apply_raw(values)
        return out


def _bin_offsets(n_bins, cols):
    """Packed-histogram offsets for the selected columns: position jj owns
    cells off[jj]..off[jj+1]-1, sized to its own bin count."""
    off = np.zeros(len(cols) + 1, dtype=np.int64)
    np.cumsum(n_bins[cols], out=off[1:])
    return off, int(off[-1])


def _grow_depth_wise(binned, n_bins, g, h, rows, cols, params, lr):
    """Level-synchronous depth-wise growth: one histogram pass per level
    covering only each split's smaller child, the larger child recovered by
    parent-minus-sibling subtraction. Returns the packed tree plus the leaf
    value each sampled row landed in."""
    l1, l2, gamma = params.l1_alpha, params.l2_lambda, params.min_gain_gamma
    off, tot = _bin_offsets(n_bins, cols)
    n_sel = len(rows)
    sampled_values = np.zeros(n_sel, dtype=np.float64)
    node_of = np.zeros(n_sel, dtype=np.int64)

    t_col, t_bin, t_left, t_right = [-1], [-1], [-1], [-1]
    t_value, t_leaf = [0.0], [False]

    H = hist_by_node(binned, rows, node_of, np.ones(1, dtype=np.bool_), cols, g, h, off, tot, 1)
    gs = np.array([float(H[0, : off[1], 0].sum())])
    hs = np.array([float(H[0, : off[1], 1].sum())])
    counts = np.array([n_sel])
    offset = 0
    n_slots = 1

    for depth in range(params.max_depth + 1):
        is_split = np.zeros(n_slots, dtype=np.bool_)
        split_col = np.full(n_slots, -1, dtype=np.int64)
        split_bin = np.full(n_slots, -1, dtype=np.int64)
        child_base = np.full(n_slots, -1, dtype=np.int64)
        slot_value = np.zeros(n_slots, dtype=np.float64)
        child_stats: list[tuple] = []
        n_split = 0
        for j in range(n_slots):
            if depth < params.max_depth and counts[j] >= 2 and H is not None:
                gain, col, b, gl, hl, gt, ht = best_gain_split(
                    H[j], cols, n_bins, off, l1, l2, gamma
                )
                if col >= 0 and gain > 0.0:
                    is_split[j] = True
                    split_col[j] = col
                    split_bin[j] = b
                    child_base[j] = 2 * n_split
                    child_stats.append((gl, hl, gt - gl, ht - hl))
                    n_split += 1
                    continue
            slot_value[j] = lr * leaf_weight(gs[j], hs[j], l1, l2)

        live = node_of >= 0
        if not np.all(is_split) and live.any():
            nd_live = node_of[live]
            leaf_rows = ~is_split[nd_live]
            idx = np.flatnonzero(live)[leaf_rows]
            sampled_values[idx] = slot_value[nd_live[leaf_rows]]

        for j in range(n_slots):
            tid = offset + j
            if is_split[j]:
                t_col[tid] = split_col[j]
                t_bin[tid] = split_bin[j]
                t_left[tid] = offset + n_slots + child_base[j]
                t_right[tid] = offset + n_slots + child_base[j] + 1
            else:
                t_leaf[tid] = True
                t_value[tid] = slot_value[j]
        if n_split == 0:
            break
        new_slots = 2 * n_split
        for _ in range(new_slots):
            t_col.append(-1)
            t_bin.append(-1)
            t_left.append(-1)
            t_right.append(-1)
            t_value.append(0.0)
            t_leaf.append(False)

        route_level(binned, rows, node_of, is_split, split_col, split_bin, child_base)
        kept = node_of[node_of >= 0]
        counts = np.bincount(kept, minlength=new_slots) if len(kept) else np.zeros(new_slots, dtype=np.int64)
        gs = np.empty(new_slots)
        hs = np.empty(new_slots)
        for k, (gl, hl, gr, hr) in enumerate(child_stats):
            gs[2 * k], hs[2 * k] = gl, hl
            gs[2 * k + 1], hs[2 * k + 1] = gr, hr

        if depth + 1 < params.max_depth:
            scan = np.zeros(new_slots, dtype=np.bool_)
            small_right = counts[0::2] > counts[1::2]
            scan[0::2] = ~small_right
            scan[1::2] = small_right
            parent_idx = np.flatnonzero(is_split)
            Hn = hist_by_node(binned, rows, node_of, scan, cols, g, h, off, tot, new_slots)
            subtract_sibling(Hn, H, parent_idx, small_right)
            H = Hn
        else:
            H = None
        offset += n_slots
        n_slots = new_slots

    tree = TreeArrays(
        col=np.array(t_col, dtype=np.int64),
        bin=np.array(t_bin, dtype=np.int64),
        thr=np.zeros(len(t_col), dtype=np.float64),
        left=np.array(t_left, dtype=np.int64),
        right=np.array(t_right, dtype=np.int64),
        value=np.array(t_value, dtype=np.float64),
        is_leaf=np.array(t_leaf, dtype=np.bool_),
    )
    return tree, sampled_values


def _grow_leaf_wise(binned, n_bins, g, h, rows, cols, params, lr):
    off, tot = _bin_offsets(n_bins, cols)
    l1, l2 = params.l1_alpha, params.l2_lambda

    def leaf_state(node_rows, hists) -> dict:
        hgh = hists if hists is not None else hist_grad_hess(binned, node_rows, cols, g, h, off, tot)
        gain, col, b, _, _, _, _ = best_gain_split(
            hgh, cols, n_bins, off, l1, l2, params.min_gain_gamma
        )
        return {
            "rows": node_rows, "hgh": hgh,
            "g": float(hgh[: off[1], 0].sum()), "h": float(hgh[: off[1], 1].sum()),
            "gain": gain, "col": col, "bin": b, "depth": 0,
        }

    leaves = [leaf_state(rows, None)]
    tree_nodes: dict[int, dict] = {}
    next_id = [0]

    def new_id() -> int:
        next_id[0] += 1
        return next_id[0] - 1

    ids = [new_id()]
    while len(leaves) < params.max_leaves:
        best_i = -1
        best_gain = 0.0
        for i, leaf in enumerate(leaves):
            if leaf["col"] >= 0 and leaf["gain"] > best_gain and leaf["depth"] < params.max_depth:
                best_i, best_gain = i, leaf["gain"]
        if best_i < 0:
            break
        leaf = leaves[best_i]
        mask = binned[leaf["rows"], leaf["col"]] <= leaf["bin"]
        lrows = leaf["rows"][mask]
        rrows = leaf["rows"][~mask]
        if len(lrows) == 0 or len(rrows) == 0:
            leaf["col"] = -1    # degenerate candidate, retire this leaf
            continue
        if len(lrows) <= len(rrows):
            small = hist_grad_hess(binned, lrows, cols, g, h, off, tot)
            left = leaf_state(lrows, small)
            right = leaf_state(rrows, leaf["hgh"] - small)
        else:
            small = hist_grad_hess(binned, rrows, cols, g, h, off, tot)
            left = leaf_state(lrows, leaf["hgh"] - small)
            right = leaf_state(rrows, small)
        left["depth"] = right["depth"] = leaf["depth"] + 1
        li, ri = new_id(), new_id()
        tree_nodes[ids[best_i]] = {
            "leaf": False, "col": leaf["col"], "bin": leaf["bin"], "left": li, "right": ri
        }
        leaves[best_i] = left
        ids[best_i] = li
        leaves.append(right)
        ids.append(ri)

    nodes = [None] * next_id[0]
    for nid, payload in tree_nodes.items():
        nodes[nid] = payload
    sampled_values = np.empty(len(rows), dtype=np.float64)
    for leaf, nid in zip(leaves, ids):
        value = lr * leaf_weight(leaf["g"], leaf["h"], l1, l2)
        nodes[nid] = {"leaf": True, "value": value}
        sampled_values[np.searchsorted(rows, leaf["rows"])] = value
    return _pack_nodes(nodes, 0), sampled_values


def _grow_symmetric(binned, n_bins, g, h, rows, cols, params, lr):
    """Oblivious levels: one (col, bin) split shared by every leaf, chosen by
    the summed per-leaf gain; empty sides contribute their formula value."""
    l1, l2, gamma = params.l1_alpha, params.l2_lambda, params.min_gain_gamma
    off, tot = _bin_offsets(n_bins, cols)
    width = max(int(n_bins[cols].max()) - 1, 1)
    node_of = np.zeros(len(rows), dtype=np.int64)

    H = hist_by_node(binned, rows, node_of, np.ones(1, dtype=np.bool_), cols, g, h, off, tot, 1)
    gt_s = np.array([float(H[0, : off[1], 0].sum())])
    ht_s = np.array([float(H[0, : off[1], 1].sum())])
    splits: list[tuple[int, int]] = []
    n_slots = 1

    for depth in range(params.max_depth):
        total = symmetric_gain_surface(H, cols, n_bins, off, l1, l2, gamma, width)
        flat = int(np.argmax(total))
        jj, b = divmod(flat, width)
        if total[jj, b] <= 0.0:
            break
        col = int(cols[jj])
        splits.append((col, b))
        gl_s, hl_s = symmetric_side_sums(H, off, jj, b)
        new_slots = 2 * n_slots
        new_gt = np.empty(new_slots)
        new_ht = np.empty(new_slots)
        new_gt[0::2], new_gt[1::2] = gl_s, gt_s - gl_s
        new_ht[0::2], new_ht[1::2] = hl_s, ht_s - hl_s

        route_level(
            binned, rows, node_of,
            np.ones(n_slots, dtype=np.bool_),
            np.full(n_slots, col, dtype=np.int64),
            np.full(n_slots, b, dtype=np.int64),
            np.arange(0, new_slots, 2, dtype=np.int64),
        )
        if depth + 1 < params.max_depth:
            counts = np.bincount(node_of, minlength=new_slots)
            scan = np.zeros(new_slots, dtype=np.bool_)
            small_right = counts[0::2] > counts[1::2]
            scan[0::2] = ~small_right
            scan[1::2] = small_right
            Hn = hist_by_node(binned, rows, node_of, scan, cols, g, h, off, tot, new_slots)
            subtract_sibling(Hn, H, np.arange(n_slots, dtype=np.int64), small_right)
            H = Hn
        else:
            H = None
        gt_s, ht_s = new_gt, new_ht
        n_slots = new_slots

    depth = len(splits)
    n_leaves = 1 << depth
    values = np.empty(n_leaves, dtype=np.float64)
    for i in range(n_leaves):
        values[i] = lr * leaf_weight(float(gt_s[i]), float(ht_s[i]), l1, l2)
    sampled_values = values[node_of]

    # heap-layout materialization: internal node k sits at level floor(log2(k+1))
    n_internal = n_leaves - 1
    n_nodes = 2 * n_leaves - 1
    nodes: list[dict] = []
    for k in range(n_nodes):
        if k < n_internal:
            level = int(math.floor(math.log2(k + 1)))
            scol, sbin = splits[level]
            nodes.append({"leaf": False, "col": scol, "bin": sbin, "left": 2 * k + 1, "right": 2 * k + 2})
        else:
            nodes.append({"leaf": True, "value": float(values[k - n_internal])})
    return _pack_nodes(nodes, 0), sampled_values


def _pack_nodes(nodes: list, root: int) -> TreeArrays:
    n = len(nodes)
    order = {root: 0}
    queue = [root]
    while queue:
        nid = queue.pop(0)
        node = nodes[nid]
        if not node["leaf"]:
            for child in (node["left"], node["right"]):
                order[child] = len(order)
                queue.append(child)
    col = np.full(n, -1, dtype=np.int64)
    bins = np.full(n, -1, dtype=np.int64)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    value = np.zeros(n, dtype=np.float64)
    is_leaf = np.zeros(n, dtype=bool)
    for nid, new in order.items():
        node = nodes[nid]
        if node["leaf"]:
            is_leaf[new] = True
            value[new] = node["value"]
        else:
            col[new] = node["col"]
            bins[new] = node["bin"]
            left[new] = order[node["left"]]
            right[new] = order[node["right"]]
    return TreeArrays(
        col=col, bin=bins, thr=np.zeros(n, dtype=np.float64),
        left=left, right=right, value=value, is_leaf=is_leaf,
    )


def _sample_rows(params: GbdtParams, g: np.ndarray, h: np.ndarray, n: int, rng) -> np.ndarray:
    """Per-round row selection; GOSS rescales the sampled small-gradient rows
    in place (g and h are this round's scratch copies)."""
    if params.goss:
        a_n = int(params.goss_a * n)
        b_n = int(params.goss_b * n)
        if 0 < a_n < n:
            part = np.argpartition(np.abs(g), n - a_n)
            top, rest = part[n - a_n:], part[: n - a_n]
        else:
            top = np.arange(n) if a_n >= n else np.empty(0, dtype=np.int64)
            rest = np.empty(0, dtype=np.int64) if a_n >= n else np.arange(n)
        sampled = rng.choice(rest, size=min(b_n, len(rest)), replace=False)
        factor = (1.0 - params.goss_a) / params.goss_b
        g[sampled] *= factor
        h[sampled] *= factor
        return np.sort(np.concatenate([top, sampled]))
    if params.row_subsample >= 1.0:
        return np.arange(n, dtype=np.int64)
    if params.preset == "cat_like":
        # Bernoulli: independent per-row inclusion
        return np.flatnonzero(rng.random(n) < params.row_subsample).astype(np.int64)
    take = max(1, int(round(params.row_subsample * n)))
    return np.sort(rng.choice(n, size=take, replace=False)).astype(np.int64)


def fit_gbdt(
    matrix: FeatureMatrix,
    labels,
    params: GbdtParams,
    val_matrix: FeatureMatrix,
    val_labels,
    seed: int = 0,
    bins: list[np.ndarray] | None = None,
):
    """Boosted training with early stopping on validation AUC.

    Returns (ensemble, trace): trace holds one validation AUC per round;
    best_iteration is the 1-based argmax round, and prediction uses only
    trees up to it.
    """
    y = np.asarray(labels, dtype=np.int64)
    y_val = np.asarray(val_labels, dtype=np.int64)
    n = len(y)
    if min((y == 1).sum(), (y == 0).sum()) < 2 or min((y_val == 1).sum(), (y_val == 0).sum()) < 2:
        raise ValueError("fit_gbdt: need at least 2 rows per class in train and validation")

    if params.class_weighting:
        w_pos, w_neg = class_weights(y)
        w = np.where(y == 1, w_pos, w_neg)
    else:
        w = np.ones(n, dtype=np.float64)

    if bins is None:
        bins = build_histogram_bins(matrix, params.max_bins)
    n_bins = np.array([len(e) + 1 for e in bins], dtype=np.int64)
    binned = np.ascontiguousarray(bin_matrix(matrix, bins))
    binned_val = np.ascontiguousarray(bin_matrix(val_matrix, bins))
    p = binned.shape[1]

    base_rate = float(np.clip((w * y).sum() / w.sum(), 1e-7, 1 - 1e-7))
    base_margin = math.log(base_rate / (1.0 - base_rate))
    margins = np.full(n, base_margin, dtype=np.float64)
    margins_val = np.full(len(y_val), base_margin, dtype=np.float64)

    grow = {
        "xgb_like": _grow_depth_wise,
        "lgbm_like": _grow_leaf_wise,
        "cat_like": _grow_symmetric,
    }[params.preset]

    rng = np.random.default_rng(seed)
    ensemble = GbdtEnsemble(base_margin=base_margin)
    trace: list[float] = []
    best_auc, best_round = -1.0, 0

    for _ in range(params.n_rounds_max):
        probs = clamp_probs(sigmoid(margins))
        g, h = logistic_grad_hess(probs, y, w)
        rows = _sample_rows(params, g, h, n, rng)
        if params.col_subsample < 1.0:
            k = max(1, int(round(params.col_subsample * p)))
            cols = np.sort(rng.choice(p, size=k, replace=False)).astype(np.int64)
        else:
            cols = np.arange(p, dtype=np.int64)

        tree, sampled_values = grow(binned, n_bins, g, h, rows, cols, params, params.learning_rate)
        attach_thresholds(tree, bins)
        ensemble.trees.append(tree)
        margins[rows] += sampled_values
        if len(rows) < n:
            rest_mask = np.ones(n, dtype=bool)
            rest_mask[rows] = False
            rest = np.flatnonzero(rest_mask)
            margins[rest] += tree.apply_binned(np.ascontiguousarray(binned[rest]))
        margins_val += tree.apply_binned(binned_val)

        auc = roc_auc(margins_val, y_val)
        trace.append(auc)
        if auc > best_auc:
            best_auc, best_round = auc, len(trace)
        if len(trace) - best_round >= params.early_stopping_rounds:
            break

    ensemble.best_iteration = best_round
    return ensemble, trace
