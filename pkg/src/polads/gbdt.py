"""Gradient-boosted decision trees with logistic loss and per-sample weights.

Trees are regression trees over the sparse feature space, grown leaf-wise
(best gain first) up to a leaf budget, with exact split enumeration over the
sorted values of each feature column. Zeros that a sparse column leaves
implicit are handled as their own value group, so one-hot absence and the
-1.0 age sentinel participate in splits like any other value.

Split gain and leaf values follow the second-order formulation:
leaf = -G / (H + lambda), gain = [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] / 2
with G, H the sums of weighted gradients / hessians of the logistic loss.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (DegenerateDataWarning, DimensionMismatch,
                     InsufficientGroups, SingleClassTraining)
from .ingest import Label
from .sparse import CscMatrix, SparseVector

log = logging.getLogger(__name__)

_MODEL_SCHEMA = 1


# ---------------------------------------------------------------------------
# class weights (inverse class frequency)

@dataclass(frozen=True)
class ClassWeights:
    """weight(y) = n_samples / n_samples(y)."""

    weight: dict[Label, float]

    def per_sample(self, y: Sequence[Label]) -> np.ndarray:
        return np.array([self.weight[label] for label in y], dtype=np.float64)


def compute_class_weights(y: Sequence[Label]) -> ClassWeights:
    """Inverse-frequency weights; raises unless both classes appear."""
    n = len(y)
    n_pos = sum(1 for label in y if label is Label.POLITICAL)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTraining("class weights need both classes present")
    return ClassWeights({Label.POLITICAL: n / n_pos, Label.NON_POLITICAL: n / n_neg})


# ---------------------------------------------------------------------------
# logistic loss

def sigmoid(margin: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.asarray(margin, dtype=np.float64)))


def logistic_gradient_hessian(margin: np.ndarray, y: np.ndarray,
                              w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """g_i = w_i (p_i - y_i), h_i = w_i p_i (1 - p_i) with p = sigmoid(margin)."""
    p = sigmoid(margin)
    return w * (p - y), w * p * (1.0 - p)


def weighted_logistic_loss(margin: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Sum of w_i * (softplus(margin_i) - y_i * margin_i)."""
    return float(np.sum(w * (np.logaddexp(0.0, margin) - y * margin)))


# ---------------------------------------------------------------------------
# trees

@dataclass
class TreeNode:
    """Recursive node view: internal when feature is set, else a leaf."""

    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    default_direction: str = "left"
    value: float = 0.0
    cover: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


class Tree:
    """Flat-array tree: node 0 is the root, children index into the arrays,
    feature -1 marks a leaf."""

    def __init__(self, feature, threshold, left, right, default_left, value, cover):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.default_left = np.asarray(default_left, dtype=bool)
        self.value = np.asarray(value, dtype=np.float64)
        self.cover = None if cover is None else np.asarray(cover, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature >= 0])

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    @staticmethod
    def from_node(root: TreeNode) -> "Tree":
        feature, threshold, left, right, default_left, value, cover = \
            [], [], [], [], [], [], []
        has_cover = True

        def add(node: TreeNode) -> int:
            nonlocal has_cover
            i = len(feature)
            feature.append(-1 if node.is_leaf else node.feature)
            threshold.append(node.threshold)
            left.append(-1)
            right.append(-1)
            default_left.append(node.default_direction != "right")
            value.append(node.value if node.is_leaf else 0.0)
            cover.append(node.cover if node.cover is not None else np.nan)
            if node.cover is None:
                has_cover = False
            if not node.is_leaf:
                left[i] = add(node.left)
                right[i] = add(node.right)
            return i

        add(root)
        return Tree(feature, threshold, left, right, default_left, value,
                    cover if has_cover else None)

    def root(self) -> TreeNode:
        def build(i: int) -> TreeNode:
            cov = None if self.cover is None else float(self.cover[i])
            if self.feature[i] < 0:
                return TreeNode(value=float(self.value[i]), cover=cov)
            return TreeNode(
                feature=int(self.feature[i]),
                threshold=float(self.threshold[i]),
                left=build(int(self.left[i])),
                right=build(int(self.right[i])),
                default_direction="left" if self.default_left[i] else "right",
                cover=cov,
            )
        return build(0)

    def leaf_value(self, getval: Callable[[int], float]) -> float:
        """Descend with a feature-value accessor; NaN routes the default way."""
        i = 0
        while self.feature[i] >= 0:
            v = getval(int(self.feature[i]))
            if math.isnan(v):
                i = int(self.left[i]) if self.default_left[i] else int(self.right[i])
            elif v < self.threshold[i]:
                i = int(self.left[i])
            else:
                i = int(self.right[i])
        return float(self.value[i])

    def predict_batch(self, X: CscMatrix) -> np.ndarray:
        used = self.used_features()
        block = X.densify_columns(list(used))
        local = {int(f): k for k, f in enumerate(used)}
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        while True:
            feats = self.feature[node]
            active = feats >= 0
            if not np.any(active):
                break
            idx = np.nonzero(active)[0]
            cols = np.array([local[int(f)] for f in feats[idx]])
            vals = block[idx, cols]
            thr = self.threshold[node[idx]]
            go_left = vals < thr
            nan = np.isnan(vals)
            go_left[nan] = self.default_left[node[idx][nan]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.value[node]

    def to_json(self) -> dict:
        doc = {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "default_left": [bool(b) for b in self.default_left],
            "value": self.value.tolist(),
        }
        doc["cover"] = None if self.cover is None else self.cover.tolist()
        return doc

    @staticmethod
    def from_json(doc: dict) -> "Tree":
        return Tree(doc["feature"], doc["threshold"], doc["left"], doc["right"],
                    doc["default_left"], doc["value"], doc["cover"])


# ---------------------------------------------------------------------------
# params and ensemble

@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    max_depth: int = 0  # 0 means unlimited
    min_samples_leaf: int = 20
    min_gain: float = 0.0
    lambda_l2: float = 1.0
    feature_subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0 or self.max_leaves < 2 or self.min_samples_leaf < 1:
            raise ValueError("invalid tree budget parameters")
        if self.learning_rate <= 0 or self.lambda_l2 < 0 or self.min_gain < 0:
            raise ValueError("invalid learning parameters")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise ValueError("feature_subsample must be in (0, 1]")

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_json(doc: dict) -> "GbdtParams":
        return GbdtParams(**doc)


DEFAULT_GRID: tuple[GbdtParams, ...] = tuple(
    GbdtParams(n_trees=t, learning_rate=lr, max_leaves=ml, min_samples_leaf=msl)
    for t in (100, 200, 400)
    for lr in (0.05, 0.1)
    for ml in (15, 31)
    for msl in (10, 20)
)


@dataclass
class GbdtEnsemble:
    """Additive model: margin(x) = base_score + lr * sum of tree outputs."""

    base_score: float
    trees: list[Tree]
    learning_rate: float
    n_features: int
    params: GbdtParams
    feature_names: list[str] | None = None
    train_loss: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "schema_version": _MODEL_SCHEMA,
            "kind": "gbdt",
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "params": self.params.to_json(),
            "feature_names": self.feature_names,
            "trees": [t.to_json() for t in self.trees],
            "train_loss": self.train_loss,
        }

    @staticmethod
    def from_json(doc: dict) -> "GbdtEnsemble":
        if doc.get("schema_version") != _MODEL_SCHEMA or doc.get("kind") != "gbdt":
            raise ValueError("not a gbdt document")
        return GbdtEnsemble(
            base_score=float(doc["base_score"]),
            trees=[Tree.from_json(t) for t in doc["trees"]],
            learning_rate=float(doc["learning_rate"]),
            n_features=int(doc["n_features"]),
            params=GbdtParams.from_json(doc["params"]),
            feature_names=doc.get("feature_names"),
            train_loss=list(doc.get("train_loss", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True),
                              encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "GbdtEnsemble":
        return GbdtEnsemble.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _value_getter(x: SparseVector | np.ndarray) -> Callable[[int], float]:
    if isinstance(x, SparseVector):
        return x.get
    arr = np.asarray(x, dtype=np.float64)
    return lambda j: float(arr[j])


def predict_margin(m: GbdtEnsemble, x: SparseVector | np.ndarray) -> float:
    """Raw log-odds margin for one input."""
    width = x.dim if isinstance(x, SparseVector) else len(x)
    if width != m.n_features:
        raise DimensionMismatch(f"input width {width} != model width {m.n_features}")
    getval = _value_getter(x)
    total = m.base_score
    for tree in m.trees:
        total += m.learning_rate * tree.leaf_value(getval)
    return float(total)


def predict_proba(m: GbdtEnsemble, x: SparseVector | np.ndarray) -> float:
    return float(sigmoid(predict_margin(m, x)))


def predict_label(m: GbdtEnsemble, x: SparseVector | np.ndarray) -> Label:
    return Label.POLITICAL if predict_proba(m, x) >= 0.5 else Label.NON_POLITICAL


def predict_margin_batch(m: GbdtEnsemble, X: Sequence[SparseVector] | CscMatrix) -> np.ndarray:
    if not isinstance(X, CscMatrix):
        X = CscMatrix.from_vectors(list(X))
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(f"input width {X.shape[1]} != model width {m.n_features}")
    out = np.full(X.shape[0], m.base_score, dtype=np.float64)
    for tree in m.trees:
        out += m.learning_rate * tree.predict_batch(X)
    return out


def predict_proba_batch(m: GbdtEnsemble, X: Sequence[SparseVector] | CscMatrix) -> np.ndarray:
    return sigmoid(predict_margin_batch(m, X))


# ---------------------------------------------------------------------------
# training

@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float
    left_idx: np.ndarray
    right_idx: np.ndarray
    default_left: bool


class _TrainMatrix:
    """Row-major and column-major views of the training matrix, built once."""

    def __init__(self, csc: CscMatrix, vectors: Sequence[SparseVector] | None):
        self.csc = csc
        n, _ = csc.shape
        if vectors is not None:
            counts = np.fromiter((v.nnz for v in vectors), dtype=np.int64, count=n)
            self.indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=self.indptr[1:])
            self.cols = (np.concatenate([v.indices for v in vectors])
                         if n else np.empty(0, np.int64))
            self.vals = (np.concatenate([v.values for v in vectors])
                         if n else np.empty(0, np.float64))
        else:
            # transpose the CSC layout into CSR
            order = np.argsort(self.csc.rows, kind="stable")
            entry_cols = np.searchsorted(csc.indptr,
                                         np.arange(len(csc.rows)), side="right") - 1
            self.cols = entry_cols[order]
            self.vals = csc.vals[order]
            self.indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(self.indptr, csc.rows + 1, 1)
            np.cumsum(self.indptr, out=self.indptr)

    def gather(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated (row, col, val) entries of the given rows."""
        counts = self.indptr[idx + 1] - self.indptr[idx]
        total = int(counts.sum())
        if total == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, np.empty(0, dtype=np.float64)
        nz = counts > 0
        idx_nz = idx[nz]
        counts_nz = counts[nz]
        # flattened slice positions without a Python loop: steps of 1 inside
        # a row, a jump to the next row's slice start at each row boundary
        step = np.ones(total, dtype=np.int64)
        step[0] = self.indptr[idx_nz[0]]
        if len(idx_nz) > 1:
            jump_at = np.cumsum(counts_nz)[:-1]
            prev_last = self.indptr[idx_nz[:-1]] + counts_nz[:-1] - 1
            step[jump_at] = self.indptr[idx_nz[1:]] - prev_last
        positions = np.cumsum(step)
        rows_rep = np.repeat(idx, counts)
        return rows_rep, self.cols[positions], self.vals[positions]


def _best_split(tm: _TrainMatrix, idx: np.ndarray, g: np.ndarray, h: np.ndarray,
                allowed: np.ndarray | None, params: GbdtParams) -> _Split | None:
    """Exact best split for the samples in idx, one vectorized pass.

    All nonzero entries of the node are sorted by (column, value) and
    reduced into per-(column, value) groups; the implicit zeros of each
    column form one synthetic group at value 0. Candidate thresholds are
    midpoints between adjacent groups of a column; gains for every
    candidate are evaluated at once. Ties in gain resolve to the lowest
    feature index, then the lowest threshold (the candidate array is in
    that order and the first maximum wins).
    """
    n = len(idx)
    if n < 2 * params.min_samples_leaf:
        return None
    g_sum = float(g[idx].sum())
    h_sum = float(h[idx].sum())
    lam = params.lambda_l2
    parent_score = g_sum * g_sum / (h_sum + lam)

    rows_e, cols_e, vals_e = tm.gather(idx)
    if allowed is not None and len(cols_e):
        keep = allowed[cols_e]
        rows_e, cols_e, vals_e = rows_e[keep], cols_e[keep], vals_e[keep]
    if len(cols_e) == 0:
        return None
    g_e, h_e = g[rows_e], h[rows_e]

    order = np.lexsort((vals_e, cols_e))
    c_s, v_s = cols_e[order], vals_e[order]
    g_s, h_s = g_e[order], h_e[order]

    # per-(column, value) groups
    new_group = np.empty(len(c_s), dtype=bool)
    new_group[0] = True
    np.not_equal(c_s[1:], c_s[:-1], out=new_group[1:])
    new_group[1:] |= v_s[1:] != v_s[:-1]
    gstart = np.flatnonzero(new_group)
    grp_col = c_s[gstart]
    grp_val = v_s[gstart]
    grp_g = np.add.reduceat(g_s, gstart)
    grp_h = np.add.reduceat(h_s, gstart)
    grp_n = np.diff(np.append(gstart, len(c_s)))

    # per-column totals, then one synthetic zero group per sparse column
    col_start = np.flatnonzero(np.r_[True, grp_col[1:] != grp_col[:-1]])
    col_ids = grp_col[col_start]
    col_g = np.add.reduceat(grp_g, col_start)
    col_h = np.add.reduceat(grp_h, col_start)
    col_n = np.add.reduceat(grp_n, col_start)
    sparse = col_n < n
    if np.any(sparse):
        grp_col = np.concatenate([grp_col, col_ids[sparse]])
        grp_val = np.concatenate([grp_val, np.zeros(int(sparse.sum()))])
        grp_g = np.concatenate([grp_g, g_sum - col_g[sparse]])
        grp_h = np.concatenate([grp_h, h_sum - col_h[sparse]])
        grp_n = np.concatenate([grp_n, n - col_n[sparse]])
        order = np.lexsort((grp_val, grp_col))
        grp_col, grp_val = grp_col[order], grp_val[order]
        grp_g, grp_h, grp_n = grp_g[order], grp_h[order], grp_n[order]

    if len(grp_col) < 2:
        return None

    # segmented prefix sums within each column
    first = np.r_[True, grp_col[1:] != grp_col[:-1]]
    seg_id = np.cumsum(first) - 1
    cg, ch, cn = np.cumsum(grp_g), np.cumsum(grp_h), np.cumsum(grp_n)
    seg_base_at = np.flatnonzero(first)
    base_g = np.where(seg_base_at > 0, cg[seg_base_at - 1], 0.0)[seg_id]
    base_h = np.where(seg_base_at > 0, ch[seg_base_at - 1], 0.0)[seg_id]
    base_n = np.where(seg_base_at > 0, cn[seg_base_at - 1], 0)[seg_id]
    pre_g, pre_h, pre_n = cg - base_g, ch - base_h, cn - base_n

    # a boundary exists after group k when group k+1 is in the same column
    boundary = np.flatnonzero(~first[1:])
    if len(boundary) == 0:
        return None
    gl, hl = pre_g[boundary], pre_h[boundary]
    nl = pre_n[boundary]
    thr = (grp_val[boundary] + grp_val[boundary + 1]) / 2.0
    gains = 0.5 * (gl * gl / (hl + lam)
                   + (g_sum - gl) ** 2 / (h_sum - hl + lam)
                   - parent_score)
    ok = ((nl >= params.min_samples_leaf)
          & (n - nl >= params.min_samples_leaf)
          & (thr > grp_val[boundary]) & (thr <= grp_val[boundary + 1]))
    if not np.any(ok):
        return None
    gains = np.where(ok, gains, -np.inf)
    k = int(np.argmax(gains))
    if not gains[k] > params.min_gain:
        return None

    j = int(grp_col[boundary[k]])
    t = float(thr[k])
    rows, vals = tm.csc.column(j)
    pos = np.searchsorted(idx, rows)
    pos[pos >= n] = n - 1
    sel = idx[pos] == rows
    mrows, mvals = rows[sel], vals[sel]
    left_rows = mrows[mvals < t]
    if 0.0 < t and len(mrows) < n:
        zero_rows = np.setdiff1d(idx, mrows, assume_unique=True)
        left_rows = np.union1d(left_rows, zero_rows)
    else:
        left_rows = np.sort(left_rows)
    right_rows = np.setdiff1d(idx, left_rows, assume_unique=True)
    return _Split(gain=float(gains[k]), feature=j, threshold=t,
                  left_idx=left_rows, right_idx=right_rows,
                  default_left=bool(0.0 < t))


def _grow_tree(tm: _TrainMatrix, idx_all: np.ndarray, g: np.ndarray, h: np.ndarray,
               w: np.ndarray, allowed: np.ndarray | None, params: GbdtParams,
               ) -> tuple[Tree, dict[int, np.ndarray]] | None:
    """One leaf-wise regression tree; None when the root has no usable split."""
    lam = params.lambda_l2

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    default_left: list[bool] = []
    value: list[float] = []
    cover: list[float] = []
    depth: list[int] = []

    def new_leaf(idx: np.ndarray, d: int) -> int:
        i = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        default_left.append(True)
        value.append(-float(g[idx].sum()) / (float(h[idx].sum()) + lam))
        cover.append(float(w[idx].sum()))
        depth.append(d)
        return i

    root = new_leaf(idx_all, 0)
    leaf_members: dict[int, np.ndarray] = {root: idx_all}
    heap: list[tuple[float, int, int, _Split]] = []
    counter = 0

    def consider(node_id: int, idx: np.ndarray) -> None:
        nonlocal counter
        if params.max_depth and depth[node_id] >= params.max_depth:
            return
        split = _best_split(tm, idx, g, h, allowed, params)
        if split is not None:
            heapq.heappush(heap, (-split.gain, counter, node_id, split))
            counter += 1

    consider(root, idx_all)
    if not heap:
        return None
    n_leaves = 1
    while heap and n_leaves < params.max_leaves:
        _, _, node_id, split = heapq.heappop(heap)
        feature[node_id] = split.feature
        threshold[node_id] = split.threshold
        default_left[node_id] = split.default_left
        value[node_id] = 0.0
        d = depth[node_id] + 1
        li = new_leaf(split.left_idx, d)
        ri = new_leaf(split.right_idx, d)
        left[node_id] = li
        right[node_id] = ri
        del leaf_members[node_id]
        leaf_members[li] = split.left_idx
        leaf_members[ri] = split.right_idx
        n_leaves += 1
        consider(li, split.left_idx)
        consider(ri, split.right_idx)

    tree = Tree(feature, threshold, left, right, default_left, value, cover)
    return tree, leaf_members


def _labels_to_binary(y: Sequence[Label]) -> np.ndarray:
    return np.array([1.0 if label is Label.POLITICAL else 0.0 for label in y],
                    dtype=np.float64)


def train_gbdt(X: Sequence[SparseVector] | CscMatrix, y: Sequence[Label],
               w: Sequence[float] | np.ndarray, params: GbdtParams,
               feature_names: list[str] | None = None) -> GbdtEnsemble:
    """Boost regression trees on the weighted logistic loss.

    base_score is the weighted-prior log-odds; each round fits one tree to
    the current gradients/hessians. If the very first round finds no split
    with gain above min_gain, a DegenerateDataWarning is emitted and the
    base-only ensemble is returned.
    """
    if isinstance(X, CscMatrix):
        csc, vectors = X, None
    else:
        vectors = list(X)
        csc = CscMatrix.from_vectors(vectors)
    n, n_features = csc.shape
    if len(csc.vals) and not np.all(np.isfinite(csc.vals)):
        raise ValueError("training features must be finite")
    tm = _TrainMatrix(csc, vectors)
    ybin = _labels_to_binary(y)
    sw = np.asarray(w, dtype=np.float64)
    if not (n == len(ybin) == len(sw)):
        raise ValueError("X, y and w must have equal lengths")
    if np.any(sw <= 0):
        raise ValueError("sample weights must be positive")
    pos = float(np.sum(sw * ybin))
    neg = float(np.sum(sw * (1.0 - ybin)))
    if pos == 0.0 or neg == 0.0:
        raise SingleClassTraining("training data must contain both classes")
    base_score = math.log(pos / neg)

    rng = np.random.default_rng(params.seed)
    idx_all = np.arange(n, dtype=np.int64)
    margin = np.full(n, base_score, dtype=np.float64)
    trees: list[Tree] = []
    losses: list[float] = []

    for rnd in range(params.n_trees):
        allowed = None
        if params.feature_subsample < 1.0:
            k = max(1, int(math.ceil(params.feature_subsample * n_features)))
            allowed = np.zeros(n_features, dtype=bool)
            allowed[rng.choice(n_features, size=k, replace=False)] = True
        g, h = logistic_gradient_hessian(margin, ybin, sw)
        grown = _grow_tree(tm, idx_all, g, h, sw, allowed, params)
        if grown is None:
            if rnd == 0:
                warnings.warn("no split with positive gain on round 1; "
                              "model is the prior-only base score",
                              DegenerateDataWarning)
            else:
                log.info("boosting stopped early at round %d (no usable split)", rnd)
            break
        tree, leaf_members = grown
        for leaf_id, members in leaf_members.items():
            margin[members] += params.learning_rate * tree.value[leaf_id]
        trees.append(tree)
        losses.append(weighted_logistic_loss(margin, ybin, sw))

    return GbdtEnsemble(
        base_score=base_score,
        trees=trees,
        learning_rate=params.learning_rate,
        n_features=n_features,
        params=params,
        feature_names=feature_names,
        train_loss=losses,
    )


# ---------------------------------------------------------------------------
# grid search with advertiser-grouped folds

def grouped_folds(groups: Sequence[str], k: int, seed: int) -> list[np.ndarray]:
    """Partition sample indices into k folds such that all samples of one
    group (advertiser) land in the same fold."""
    unique = sorted(set(groups))
    if len(unique) < k:
        raise InsufficientGroups(
            f"{len(unique)} advertisers cannot form {k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(unique))
    assignment = {unique[int(gi)]: fold
                  for fold, chunk in enumerate(np.array_split(order, k))
                  for gi in chunk}
    folds: list[list[int]] = [[] for _ in range(k)]
    for i, grp in enumerate(groups):
        folds[assignment[grp]].append(i)
    return [np.array(f, dtype=np.int64) for f in folds]


def grid_search_cv(X: Sequence[SparseVector], y: Sequence[Label],
                   groups: Sequence[str], grid: Sequence[GbdtParams],
                   k: int = 5, seed: int = 0) -> GbdtParams:
    """Pick the grid entry with the best mean validation F1 over k
    advertiser-grouped folds.

    Ties break toward fewer trees, then lower learning rate, then grid
    order. Per-fold class weights are recomputed from the fold's training
    labels. Fold scores are logged per configuration.
    """
    from .evaluate import compute_metrics  # metrics live with the evaluation code

    if not grid:
        raise ValueError("empty parameter grid")
    folds = grouped_folds(groups, k, seed)
    all_idx = np.arange(len(X), dtype=np.int64)
    best_key: tuple | None = None
    best_params: GbdtParams | None = None
    for order, params in enumerate(grid):
        fold_scores: list[float] = []
        for fold in folds:
            val_set = set(fold.tolist())
            tr = np.array([i for i in all_idx if int(i) not in val_set], dtype=np.int64)
            X_tr = [X[int(i)] for i in tr]
            y_tr = [y[int(i)] for i in tr]
            weights = compute_class_weights(y_tr).per_sample(y_tr)
            model = train_gbdt(X_tr, y_tr, weights, params)
            preds = [Label.POLITICAL if p >= 0.5 else Label.NON_POLITICAL
                     for p in predict_proba_batch(model, [X[int(i)] for i in fold])]
            truth = [y[int(i)] for i in fold]
            fold_scores.append(compute_metrics(preds, truth).f1)
        mean_f1 = float(np.mean(fold_scores))
        log.info("grid entry %d: mean F1 %.4f, folds %s", order, mean_f1,
                 ["%.4f" % s for s in fold_scores])
        key = (-mean_f1, params.n_trees, params.learning_rate, order)
        if best_key is None or key < best_key:
            best_key = key
            best_params = params
    assert best_params is not None
    return best_params
