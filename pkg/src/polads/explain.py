"""Exact SHAP attributions for the boosted-tree model.

The per-tree algorithm is the polynomial-time path-extension recursion for
trees: it walks every root-to-leaf path once, maintaining for each feature
on the path the fraction of sample mass that flows through when the feature
is excluded (cover ratio) or included (0 or 1), together with permutation
weights for every possible subset size. Expectations are path-dependent:
the per-node covers recorded during training define them, no background
dataset is needed.

brute_force_shapley is the testing oracle: the classical factorial-weighted
sum over feature coalitions, with a pluggable coalition-value function so
it can marginalize either over a background sample set or with the same
cover-based expectation the fast algorithm uses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyMatrix, MissingCover, TooManyFeatures
from .gbdt import GbdtEnsemble, Tree
from .sparse import SparseVector

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# path state for the fast recursion

class _Path:
    """Unique-path bookkeeping: one entry per distinct feature met so far,
    entry 0 is a sentinel. pweights[i] holds the summed permutation weight
    of subsets of size i drawn from the path features."""

    __slots__ = ("feat", "zero", "one", "w")

    def __init__(self):
        self.feat: list[int] = []
        self.zero: list[float] = []
        self.one: list[float] = []
        self.w: list[float] = []

    def copy(self) -> "_Path":
        p = _Path()
        p.feat = self.feat.copy()
        p.zero = self.zero.copy()
        p.one = self.one.copy()
        p.w = self.w.copy()
        return p

    def extend(self, zero_fraction: float, one_fraction: float, feature: int) -> None:
        depth = len(self.feat)
        self.feat.append(feature)
        self.zero.append(zero_fraction)
        self.one.append(one_fraction)
        self.w.append(1.0 if depth == 0 else 0.0)
        for i in range(depth - 1, -1, -1):
            self.w[i + 1] += one_fraction * self.w[i] * (i + 1) / (depth + 1)
            self.w[i] = zero_fraction * self.w[i] * (depth - i) / (depth + 1)

    def unwind(self, index: int) -> None:
        depth = len(self.feat) - 1
        one_fraction = self.one[index]
        zero_fraction = self.zero[index]
        carry = self.w[depth]
        for i in range(depth - 1, -1, -1):
            if one_fraction != 0.0:
                tmp = self.w[i]
                self.w[i] = carry * (depth + 1) / ((i + 1) * one_fraction)
                carry = tmp - self.w[i] * zero_fraction * (depth - i) / (depth + 1)
            else:
                self.w[i] = self.w[i] * (depth + 1) / (zero_fraction * (depth - i))
        for i in range(index, depth):
            self.feat[i] = self.feat[i + 1]
            self.zero[i] = self.zero[i + 1]
            self.one[i] = self.one[i + 1]
        del self.feat[depth], self.zero[depth], self.one[depth], self.w[depth]

    def unwound_sum(self, index: int) -> float:
        """Total permutation weight if entry `index` were unwound."""
        depth = len(self.feat) - 1
        one_fraction = self.one[index]
        zero_fraction = self.zero[index]
        carry = self.w[depth]
        total = 0.0
        for i in range(depth - 1, -1, -1):
            if one_fraction != 0.0:
                tmp = carry * (depth + 1) / ((i + 1) * one_fraction)
                total += tmp
                carry = self.w[i] - tmp * zero_fraction * (depth - i) / (depth + 1)
            else:
                total += self.w[i] / zero_fraction * (depth + 1) / (depth - i)
        return total

    def find(self, feature: int) -> int | None:
        for i in range(1, len(self.feat)):
            if self.feat[i] == feature:
                return i
        return None


def _check_cover(tree: Tree) -> np.ndarray:
    if tree.cover is None or np.any(~np.isfinite(tree.cover)) or tree.cover[0] <= 0:
        raise MissingCover("tree has no usable per-node cover counts")
    return tree.cover


def node_expectations(tree: Tree) -> np.ndarray:
    """Cover-weighted expected output of the subtree under every node."""
    cover = _check_cover(tree)
    mean = np.array(tree.value, dtype=np.float64)
    # children appear after parents in the flat layout, so walk backwards
    for i in range(tree.n_nodes - 1, -1, -1):
        if tree.feature[i] >= 0:
            li, ri = int(tree.left[i]), int(tree.right[i])
            wl, wr = cover[li], cover[ri]
            mean[i] = (wl * mean[li] + wr * mean[ri]) / (wl + wr)
    return mean


def tree_shap(tree: Tree, x: SparseVector | np.ndarray,
              phi: np.ndarray | None = None) -> np.ndarray:
    """Exact path-dependent Shapley attributions of one tree's output.

    Requires the per-node covers populated during training. Attributions sum
    to tree(x) minus the cover-weighted expectation of the tree.
    """
    cover = _check_cover(tree)
    dense = x.to_dense() if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64)
    if phi is None:
        phi = np.zeros(len(dense), dtype=np.float64)

    def recurse(node: int, path: _Path, zero_fraction: float,
                one_fraction: float, feature: int) -> None:
        path = path.copy()
        path.extend(zero_fraction, one_fraction, feature)
        if tree.feature[node] < 0:
            for i in range(1, len(path.feat)):
                weight = path.unwound_sum(i)
                phi[path.feat[i]] += (weight * (path.one[i] - path.zero[i])
                                      * tree.value[node])
            return
        split = int(tree.feature[node])
        li, ri = int(tree.left[node]), int(tree.right[node])
        v = dense[split]
        if math.isnan(v):
            hot = li if tree.default_left[node] else ri
        elif v < tree.threshold[node]:
            hot = li
        else:
            hot = ri
        cold = ri if hot == li else li
        hot_fraction = cover[hot] / cover[node]
        cold_fraction = cover[cold] / cover[node]
        incoming_zero = 1.0
        incoming_one = 1.0
        previous = path.find(split)
        if previous is not None:
            incoming_zero = path.zero[previous]
            incoming_one = path.one[previous]
            path.unwind(previous)
        recurse(hot, path, hot_fraction * incoming_zero, incoming_one, split)
        recurse(cold, path, cold_fraction * incoming_zero, 0.0, split)

    recurse(0, _Path(), 1.0, 1.0, -1)
    return phi


# ---------------------------------------------------------------------------
# ensemble level

@dataclass
class ShapMatrix:
    """Per-sample, per-feature attributions of the ensemble margin.

    base_value + values[i].sum() equals the margin of sample i.
    """

    values: np.ndarray
    base_value: float
    feature_names: list[str] | None = None

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def iter_shap(m: GbdtEnsemble, X: Iterable[SparseVector | np.ndarray],
              ) -> Iterable[np.ndarray]:
    """Per-sample attribution rows, streamed (for large corpora)."""
    for x in X:
        phi = np.zeros(m.n_features, dtype=np.float64)
        for tree in m.trees:
            tree_shap(tree, x, phi=phi)
        yield phi * m.learning_rate


def ensemble_base_value(m: GbdtEnsemble) -> float:
    return m.base_score + m.learning_rate * sum(
        float(node_expectations(t)[0]) for t in m.trees)


def ensemble_shap(m: GbdtEnsemble, X: Sequence[SparseVector | np.ndarray],
                  ) -> ShapMatrix:
    """Attributions of every sample; rows scale per-tree values by the
    learning rate and the base value absorbs the expected tree outputs."""
    rows = np.zeros((len(X), m.n_features), dtype=np.float64)
    for i, phi in enumerate(iter_shap(m, X)):
        rows[i] = phi
    return ShapMatrix(values=rows, base_value=ensemble_base_value(m),
                      feature_names=m.feature_names)


# ---------------------------------------------------------------------------
# global importance

@dataclass
class ImportanceRanking:
    """(feature name, mean |SHAP|) pairs, scores non-increasing."""

    entries: list[tuple[str, float]]

    def top(self, k: int) -> list[tuple[str, float]]:
        return self.entries[:k]

    def to_json(self) -> list[dict]:
        return [{"feature": name, "mean_abs_shap": score}
                for name, score in self.entries]


def global_importance(matrix: ShapMatrix, top_k: int | None = None) -> ImportanceRanking:
    """Features ranked by mean absolute attribution; zero-score features are
    dropped (an all-zero matrix yields an empty ranking with a warning)."""
    if matrix.values.size == 0:
        raise EmptyMatrix("no attribution values to rank")
    scores = np.abs(matrix.values).mean(axis=0)
    names = matrix.feature_names or [f"f{i}" for i in range(matrix.n_features)]
    ranked = sorted(((names[i], float(s)) for i, s in enumerate(scores) if s > 0),
                    key=lambda kv: (-kv[1], kv[0]))
    if not ranked:
        log.warning("all attributions are zero; importance ranking is empty")
    if top_k is not None:
        ranked = ranked[:top_k]
    return ImportanceRanking(ranked)


def split_importance(ranking: ImportanceRanking, is_text: Callable[[str], bool],
                     ) -> tuple[ImportanceRanking, ImportanceRanking]:
    """Partition a ranking into keyword rows and targeting-attribute rows."""
    text = [e for e in ranking.entries if is_text(e[0])]
    targets = [e for e in ranking.entries if not is_text(e[0])]
    return ImportanceRanking(text), ImportanceRanking(targets)


# ---------------------------------------------------------------------------
# brute-force oracle

def shapley_from_coalition_value(value_of: Callable[[frozenset[int]], float],
                                 features: Sequence[int]) -> dict[int, float]:
    """Classical Shapley formula over all coalitions of the given features."""
    feats = list(features)
    n = len(feats)
    if n > 20:
        raise TooManyFeatures(f"{n} features would need 2^{n} coalitions")
    cache: dict[frozenset[int], float] = {}

    def v(s: frozenset[int]) -> float:
        if s not in cache:
            cache[s] = value_of(s)
        return cache[s]

    fact = math.factorial
    phi = {f: 0.0 for f in feats}
    for f in feats:
        rest = [q for q in feats if q != f]
        for mask in range(1 << len(rest)):
            s = frozenset(rest[k] for k in range(len(rest)) if mask >> k & 1)
            weight = fact(len(s)) * fact(n - len(s) - 1) / fact(n)
            phi[f] += weight * (v(s | {f}) - v(s))
    return phi


def tree_coalition_value(tree: Tree, x: SparseVector | np.ndarray,
                         ) -> Callable[[frozenset[int]], float]:
    """Path-dependent conditional expectation: present features follow x,
    absent features average the children by their cover fractions."""
    cover = _check_cover(tree)
    dense = x.to_dense() if isinstance(x, SparseVector) else np.asarray(x, dtype=np.float64)

    def value_of(present: frozenset[int]) -> float:
        def walk(node: int) -> float:
            if tree.feature[node] < 0:
                return float(tree.value[node])
            split = int(tree.feature[node])
            li, ri = int(tree.left[node]), int(tree.right[node])
            if split in present:
                v = dense[split]
                if math.isnan(v):
                    return walk(li if tree.default_left[node] else ri)
                return walk(li) if v < tree.threshold[node] else walk(ri)
            wl, wr = cover[li], cover[ri]
            return (wl * walk(li) + wr * walk(ri)) / (wl + wr)
        return walk(0)

    return value_of


def background_coalition_value(model: Callable[[np.ndarray], float],
                               x: np.ndarray, background: np.ndarray,
                               ) -> Callable[[frozenset[int]], float]:
    """Interventional expectation: absent features are replaced by each
    background row in turn and the model outputs averaged."""
    x = np.asarray(x, dtype=np.float64)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))

    def value_of(present: frozenset[int]) -> float:
        cols = sorted(present)
        total = 0.0
        for row in background:
            z = row.copy()
            z[cols] = x[cols]
            total += float(model(z))
        return total / len(background)

    return value_of


def brute_force_shapley(model: Callable[[np.ndarray], float], x: np.ndarray,
                        background: np.ndarray,
                        features: Sequence[int]) -> dict[int, float]:
    """Exact Shapley values of an arbitrary margin function, marginalizing
    absent features over a background sample set. Capped at 20 features."""
    return shapley_from_coalition_value(
        background_coalition_value(model, x, background), features)


def brute_force_tree_shapley(tree: Tree, x: SparseVector | np.ndarray,
                             features: Sequence[int] | None = None) -> dict[int, float]:
    """Exact Shapley values of one tree under the same path-dependent
    expectation tree_shap uses; the equivalence oracle for tests."""
    if features is None:
        features = [int(f) for f in tree.used_features()]
    return shapley_from_coalition_value(tree_coalition_value(tree, x), features)
