"""Histogram tree machinery shared by the boosted, forest and single-tree
learners: numba kernels for histogram accumulation and Gini growth, the
regularized split-gain formula, and a flat node-array tree representation.

All kernels are serial with a fixed accumulation order, so results are
bit-identical run to run regardless of outer thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit


def _soft_threshold(g: float, l1: float) -> float:
    if g > l1:
        return g - l1
    if g < -l1:
        return g + l1
    return 0.0


def _reg_term(g: float, h: float, l1: float, l2: float) -> float:
    denom = h + l2
    if denom <= 0.0:
        return 0.0
    t = _soft_threshold(g, l1)
    return t * t / denom


def split_gain(
    gl: float, hl: float, gr: float, hr: float,
    l1: float, l2: float, gamma: float,
) -> float:
    """Regularized gain of splitting {L, R} off their parent:
    0.5 [T(GL)^2/(HL+l2) + T(GR)^2/(HR+l2) - T(GL+GR)^2/(HL+HR+l2)] - gamma
    with the l1 soft threshold T(G) = sign(G) max(|G|-l1, 0)."""
    return 0.5 * (
        _reg_term(gl, hl, l1, l2)
        + _reg_term(gr, hr, l1, l2)
        - _reg_term(gl + gr, hl + hr, l1, l2)
    ) - gamma


def leaf_weight(g: float, h: float, l1: float, l2: float) -> float:
    denom = h + l2
    if denom <= 0.0:
        return 0.0
    return -_soft_threshold(g, l1) / denom


@njit(cache=True)
def hist_grad_hess(binned, rows, cols, g, h, off, total_bins):
    """Gradient/hessian histograms over the given rows. The bin axis is
    packed: column position jj owns cells off[jj]..off[jj+1]-1, so columns
    with few bins cost no padding, and each row's (grad, hess) update lands
    on one cache line.

    Rows are accumulated in the order given, so a child scanned over an
    ordered subset of its parent's rows reproduces the parent's partial sums
    exactly; histogram subtraction on fully-moved bins is then exact zero.
    Hessians are strictly positive per row, making hess == 0 an exact
    emptiness test."""
    hgh = np.zeros((total_bins, 2), dtype=np.float64)
    for ri in range(len(rows)):
        r = rows[ri]
        gv = g[r]
        hv = h[r]
        for jj in range(len(cols)):
            c = off[jj] + binned[r, cols[jj]]
            hgh[c, 0] += gv
            hgh[c, 1] += hv
    return hgh


@njit(cache=True)
def best_gain_split(hgh, cols, n_bins, off, l1, l2, gamma):
    """Scan all (column, bin) candidates; ties break to the lowest column
    index, then the lowest bin. Returns (gain, col, bin, gl, hl, gt, ht)
    with col = -1 when no candidate has both sides populated; the side sums
    let the caller derive child stats without another histogram pass."""
    best_gain = -np.inf
    best_j = -1
    best_bin = -1
    best_gl = 0.0
    best_hl = 0.0
    best_gt = 0.0
    best_ht = 0.0
    for j in range(len(cols)):
        col = cols[j]
        nb = n_bins[col]
        if nb < 2:
            continue
        base = off[j]
        gt = 0.0
        ht = 0.0
        for b in range(nb):
            gt += hgh[base + b, 0]
            ht += hgh[base + b, 1]
        at = abs(gt) - l1
        tt = at if at > 0.0 else 0.0
        parent = tt * tt / (ht + l2) if ht + l2 > 0.0 else 0.0
        gl = 0.0
        hl = 0.0
        for b in range(nb - 1):
            gl += hgh[base + b, 0]
            hl += hgh[base + b, 1]
            if hl <= 0.0:
                continue
            hr = ht - hl
            if hr <= 0.0:
                break  # hl is nondecreasing, so every later bin is empty-right too
            gr = gt - gl
            al = abs(gl) - l1
            tl = al if al > 0.0 else 0.0
            ar = abs(gr) - l1
            tr = ar if ar > 0.0 else 0.0
            lterm = tl * tl / (hl + l2) if hl + l2 > 0.0 else 0.0
            rterm = tr * tr / (hr + l2) if hr + l2 > 0.0 else 0.0
            gain = 0.5 * (lterm + rterm - parent) - gamma
            if gain > best_gain:
                best_gain = gain
                best_j = j
                best_bin = b
                best_gl = gl
                best_hl = hl
                best_gt = gt
                best_ht = ht
    best_col = cols[best_j] if best_j >= 0 else -1
    return best_gain, best_col, best_bin, best_gl, best_hl, best_gt, best_ht


@njit(cache=True)
def hist_by_node(binned, rows, node_of, scan_mask, cols, g, h, off, total_bins, n_slots):
    """Histograms for a whole tree level in one pass: rows[i] accumulates
    into slot node_of[i] when that slot is marked for scanning. Bin packing
    as in hist_grad_hess. Row order is fixed, so a slot holding an ordered
    subset of its parent's rows gets the parent's exact partial sums.

    Only scanned slots are zero-initialized; unscanned slots hold garbage
    until subtract_sibling overwrites them, which skips a memset that
    dominates at deep levels."""
    hgh = np.empty((n_slots, total_bins, 2), dtype=np.float64)
    for nd in range(n_slots):
        if scan_mask[nd]:
            for c in range(total_bins):
                hgh[nd, c, 0] = 0.0
                hgh[nd, c, 1] = 0.0
    for ri in range(len(rows)):
        nd = node_of[ri]
        if nd < 0 or not scan_mask[nd]:
            continue
        r = rows[ri]
        gv = g[r]
        hv = h[r]
        for jj in range(len(cols)):
            c = off[jj] + binned[r, cols[jj]]
            hgh[nd, c, 0] += gv
            hgh[nd, c, 1] += hv
    return hgh


@njit(cache=True)
def subtract_sibling(child, parent, parent_idx, small_right):
    """Fill each level's unscanned big child as parent minus scanned small
    sibling: child slots 2k and 2k+1 descend from parent parent_idx[k], and
    small_right[k] says which of the pair was scanned."""
    total_bins = child.shape[1]
    for k in range(len(parent_idx)):
        sm = 2 * k + 1 if small_right[k] else 2 * k
        bg = sm ^ 1
        pk = parent_idx[k]
        for c in range(total_bins):
            child[bg, c, 0] = parent[pk, c, 0] - child[sm, c, 0]
            child[bg, c, 1] = parent[pk, c, 1] - child[sm, c, 1]


@njit(cache=True)
def route_level(binned, rows, node_of, is_split, split_col, split_bin, child_base):
    """Advance per-row slot assignments one level down: rows in splitting
    slots move to child_base[slot] (left, bin <= split) or +1 (right);
    rows in finalized-leaf slots are retired to -1."""
    for ri in range(len(rows)):
        nd = node_of[ri]
        if nd < 0:
            continue
        if not is_split[nd]:
            node_of[ri] = -1
        elif binned[rows[ri], split_col[nd]] <= split_bin[nd]:
            node_of[ri] = child_base[nd]
        else:
            node_of[ri] = child_base[nd] + 1


@njit(cache=True)
def symmetric_gain_surface(hgh, cols, n_bins, off, l1, l2, gamma, width):
    """Gain surface of an oblivious level: each (column, bin) cell sums the
    per-slot split gains over every slot of the level.

    Unlike best_gain_split, empty sides keep their formula value: a shared
    oblivious split may be useless in one leaf yet pay for itself elsewhere.
    Cells past a column's bin range stay zero; the caller treats a
    non-positive argmax as no usable split, so they never produce one."""
    n_slots = hgh.shape[0]
    out = np.zeros((len(cols), width), dtype=np.float64)
    for s in range(n_slots):
        for j in range(len(cols)):
            nb = n_bins[cols[j]]
            if nb < 2:
                continue
            base = off[j]
            gt = 0.0
            ht = 0.0
            for b in range(nb):
                gt += hgh[s, base + b, 0]
                ht += hgh[s, base + b, 1]
            at = abs(gt) - l1
            tt = at if at > 0.0 else 0.0
            parent = tt * tt / (ht + l2) if ht + l2 > 0.0 else 0.0
            gl = 0.0
            hl = 0.0
            for b in range(nb - 1):
                gl += hgh[s, base + b, 0]
                hl += hgh[s, base + b, 1]
                gr = gt - gl
                hr = ht - hl
                al = abs(gl) - l1
                tl = al if al > 0.0 else 0.0
                ar = abs(gr) - l1
                tr = ar if ar > 0.0 else 0.0
                lterm = tl * tl / (hl + l2) if hl + l2 > 0.0 else 0.0
                rterm = tr * tr / (hr + l2) if hr + l2 > 0.0 else 0.0
                out[j, b] += 0.5 * (lterm + rterm - parent) - gamma
    return out


@njit(cache=True)
def symmetric_side_sums(hgh, off, jj, b):
    """Per-slot left-side gradient/hessian sums for the shared split
    (column position jj, bin b): everything in bins 0..b goes left."""
    n_slots = hgh.shape[0]
    base = off[jj]
    gl = np.empty(n_slots, dtype=np.float64)
    hl = np.empty(n_slots, dtype=np.float64)
    for s in range(n_slots):
        sg = 0.0
        sh = 0.0
        for k in range(b + 1):
            sg += hgh[s, base + k, 0]
            sh += hgh[s, base + k, 1]
        gl[s] = sg
        hl[s] = sh
    return gl, hl


@dataclass
class TreeArrays:
    """Flat binary tree: internal nodes carry (col, bin, thr); leaves carry a
    value (log-odds step for boosting, positive-class probability for Gini
    trees). thr is the float boundary equivalent of the bin split, so raw
    matrices and binned matrices route identically."""

    col: np.ndarray
    bin: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    is_leaf: np.ndarray
    w_pos: np.ndarray = field(default_factory=lambda: np.empty(0))
    w_neg: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_nodes(self) -> int:
        return len(self.col)

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if not self.is_leaf[i]:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply_binned(self, binned: np.ndarray) -> np.ndarray:
        return _descend_binned(
            self.col, self.bin, self.left, self.right, self.value, self.is_leaf,
            binned,
        )

    def apply_raw(self, values: np.ndarray) -> np.ndarray:
        return _descend_raw(
            self.col, self.thr, self.left, self.right, self.value, self.is_leaf,
            np.ascontiguousarray(values, dtype=np.float64),
        )

    def leaf_index_raw(self, values: np.ndarray) -> np.ndarray:
        return _descend_raw_index(
            self.col, self.thr, self.left, self.right, self.is_leaf,
            np.ascontiguousarray(values, dtype=np.float64),
        )


@njit(cache=True)
def _descend_binned(col, bins, left, right, value, is_leaf, x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        cur = 0
        while not is_leaf[cur]:
            if x[i, col[cur]] <= bins[cur]:
                cur = left[cur]
            else:
                cur = right[cur]
        out[i] = value[cur]
    return out


@njit(cache=True)
def _descend_raw(col, thr, left, right, value, is_leaf, x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        cur = 0
        while not is_leaf[cur]:
            if x[i, col[cur]] < thr[cur]:
                cur = left[cur]
            else:
                cur = right[cur]
        out[i] = value[cur]
    return out


@njit(cache=True)
def _descend_raw_index(col, thr, left, right, is_leaf, x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        cur = 0
        while not is_leaf[cur]:
            if x[i, col[cur]] < thr[cur]:
                cur = left[cur]
            else:
                cur = right[cur]
        out[i] = cur
    return out


def attach_thresholds(tree: TreeArrays, edges: list[np.ndarray]) -> None:
    """Fill float thresholds from bin edges: bin(x) <= b  <=>  x < edges[b]."""
    for i in range(tree.n_nodes):
        if not tree.is_leaf[i]:
            tree.thr[i] = edges[tree.col[i]][tree.bin[i]]


@njit(cache=True)
def grow_gini_tree(
    binned, n_bins, y, w, idx,
    max_depth, mtry, seed, accept_zero_gain, min_rows_split,
):
    """Weighted-Gini CART growth over binned columns.

    idx may contain repeats (bootstrap). mtry < p draws a feature subset per
    node from numba's seeded generator; mtry >= p scans all columns and never
    touches the generator. Candidate ties break to lowest column then lowest
    bin. Returns flat node arrays (parallel to TreeArrays) plus per-node
    weighted class masses for pruning.
    """
    n_feat = binned.shape[1]
    use_all = mtry >= n_feat
    if not use_all:
        np.random.seed(seed)
    max_bins = 0
    for j in range(n_feat):
        if n_bins[j] > max_bins:
            max_bins = n_bins[j]

    max_nodes = 2 ** (max_depth + 2) - 1
    node_col = np.full(max_nodes, -1, dtype=np.int64)
    node_bin = np.full(max_nodes, -1, dtype=np.int64)
    node_left = np.full(max_nodes, -1, dtype=np.int64)
    node_right = np.full(max_nodes, -1, dtype=np.int64)
    node_prob = np.zeros(max_nodes, dtype=np.float64)
    node_leaf = np.zeros(max_nodes, dtype=np.bool_)
    node_wpos = np.zeros(max_nodes, dtype=np.float64)
    node_wneg = np.zeros(max_nodes, dtype=np.float64)

    work = idx.copy()
    tmp = np.empty(len(work), dtype=np.int64)
    perm = np.arange(n_feat)
    chosen = np.empty(min(mtry, n_feat), dtype=np.int64)

    hp = np.empty(max_bins, dtype=np.float64)
    hn = np.empty(max_bins, dtype=np.float64)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_lo = np.empty(max_nodes, dtype=np.int64)
    stack_hi = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = len(work)
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]

        wpos = 0.0
        wneg = 0.0
        for r in range(lo, hi):
            if y[work[r]] == 1:
                wpos += w[work[r]]
            else:
                wneg += w[work[r]]
        wtot = wpos + wneg
        node_wpos[node] = wpos
        node_wneg[node] = wneg
        node_prob[node] = 0.5 if wtot <= 0.0 else wpos / wtot

        if (
            wpos <= 0.0 or wneg <= 0.0
            or depth >= max_depth
            or hi - lo < min_rows_split
        ):
            node_leaf[node] = True
            continue

        if use_all:
            k_feat = n_feat
        else:
            k_feat = mtry
            for k in range(k_feat):
                j = k + np.random.randint(0, n_feat - k)
                t = perm[k]
                perm[k] = perm[j]
                perm[j] = t
                chosen[k] = perm[k]
            # insertion sort: scan order must be ascending for tie-breaking
            for a in range(1, k_feat):
                v = chosen[a]
                b = a - 1
                while b >= 0 and chosen[b] > v:
                    chosen[b + 1] = chosen[b]
                    b -= 1
                chosen[b + 1] = v

        parent_score = (wpos * wpos + wneg * wneg) / wtot
        best_score = -1.0
        best_col = -1
        best_bin = -1
        for kk in range(k_feat):
            col = kk if use_all else chosen[kk]
            nb = n_bins[col]
            if nb < 2:
                continue
            for b in range(nb):
                hp[b] = 0.0
                hn[b] = 0.0
            for r in range(lo, hi):
                row = work[r]
                b = binned[row, col]
                if y[row] == 1:
                    hp[b] += w[row]
                else:
                    hn[b] += w[row]
            lwp = 0.0
            lwn = 0.0
            for b in range(nb - 1):
                lwp += hp[b]
                lwn += hn[b]
                lw = lwp + lwn
                rwp = wpos - lwp
                rwn = wneg - lwn
                rw = rwp + rwn
                if lw <= 0.0 or rw <= 0.0:
                    continue
                score = (lwp * lwp + lwn * lwn) / lw + (rwp * rwp + rwn * rwn) / rw
                if score > best_score:
                    best_score = score
                    best_col = col
                    best_bin = b

        if best_col < 0:
            node_leaf[node] = True
            continue
        gain = best_score - parent_score
        if not accept_zero_gain and gain <= 1e-12 * wtot:
            node_leaf[node] = True
            continue

        # stable partition: left block keeps rows with bin <= best_bin
        n_left = 0
        n_right = 0
        for r in range(lo, hi):
            row = work[r]
            if binned[row, best_col] <= best_bin:
                work[lo + n_left] = row
                n_left += 1
            else:
                tmp[n_right] = row
                n_right += 1
        for r in range(n_right):
            work[lo + n_left + r] = tmp[r]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        node_col[node] = best_col
        node_bin[node] = best_bin
        node_left[node] = left_id
        node_right[node] = right_id

        stack_node[top] = right_id
        stack_lo[top] = lo + n_left
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = left_id
        stack_lo[top] = lo
        stack_hi[top] = hi - n_right
        stack_depth[top] = depth + 1
        top += 1

    return (
        node_col[:n_nodes], node_bin[:n_nodes], node_left[:n_nodes],
        node_right[:n_nodes], node_prob[:n_nodes], node_leaf[:n_nodes],
        node_wpos[:n_nodes], node_wneg[:n_nodes],
    )


def gini_tree(
    binned: np.ndarray,
    n_bins: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    idx: np.ndarray,
    edges: list[np.ndarray],
    max_depth: int,
    mtry: int | None = None,
    seed: int = 0,
    accept_zero_gain: bool = False,
    min_rows_split: int = 2,
) -> TreeArrays:
    """Grow a weighted-Gini tree and return it with float thresholds set."""
    p = binned.shape[1]
    col, bins, left, right, prob, leaf, wpos, wneg = grow_gini_tree(
        binned,
        n_bins.astype(np.int64),
        y.astype(np.int8),
        w.astype(np.float64),
        idx.astype(np.int64),
        max_depth,
        p if mtry is None else mtry,
        seed,
        accept_zero_gain,
        min_rows_split,
    )
    tree = TreeArrays(
        col=col, bin=bins, thr=np.zeros(len(col), dtype=np.float64),
        left=left, right=right, value=prob, is_leaf=leaf,
        w_pos=wpos, w_neg=wneg,
    )
    attach_thresholds(tree, edges)
    return tree
