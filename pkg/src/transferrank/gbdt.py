"""Gradient-boosted regression trees trained with LambdaRank gradients.

The booster is deliberately small and exact: leaf-wise growth, exact split
enumeration over sorted feature values (no histogram binning), second-order
split gain, and per-split learned routing for missing values. Everything is
deterministic: ties between candidate splits fall back to the smallest
feature index, then the smallest threshold, then missing-goes-right; ties
between growable leaves fall back to creation order. Training twice on the
same input yields byte-identical serialized models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .dataset import FeatureRow, RankingDataset
from .errors import DataError, SchemaError
from .metrics import ndcg_at_p

MODEL_FORMAT = "transferrank.gbdt"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters; the defaults are the package defaults."""

    num_trees: int = 100
    max_leaves: int = 16
    learning_rate: float = 0.1
    min_leaf_count: int = 5
    reg_lambda: float = 1.0
    sigma: float = 1.0
    gamma_max: int = 10
    ndcg_truncation: int = 3

    def __post_init__(self) -> None:
        if self.num_trees < 0:
            raise ValueError("num_trees must be >= 0")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.min_leaf_count < 1:
            raise ValueError("min_leaf_count must be >= 1")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.gamma_max < 1:
            raise ValueError("gamma_max must be >= 1")
        if self.ndcg_truncation < 1:
            raise ValueError("ndcg_truncation must be >= 1")


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    missing_goes_left: bool
    gain: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


def _is_missing(value: float | None) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


@dataclass(frozen=True)
class RegressionTree:
    root: Node

    def predict_row(self, values: Sequence[float | None]) -> float:
        node = self.root
        while isinstance(node, Split):
            v = values[node.feature]
            if _is_missing(v):
                node = node.left if node.missing_goes_left else node.right
            else:
                node = node.left if v <= node.threshold else node.right
        return node.value

    def predict_matrix(self, matrix: np.ndarray) -> np.ndarray:
        out = np.zeros(matrix.shape[0])

        def apply(node: Node, idx: np.ndarray) -> None:
            if isinstance(node, Leaf):
                out[idx] = node.value
                return
            col = matrix[idx, node.feature]
            miss = np.isnan(col)
            goes_left = np.where(miss, node.missing_goes_left, col <= node.threshold)
            apply(node.left, idx[goes_left])
            apply(node.right, idx[~goes_left])

        apply(self.root, np.arange(matrix.shape[0]))
        return out

    def leaf_count(self) -> int:
        return sum(1 for node in self.iter_nodes() if isinstance(node, Leaf))

    def iter_nodes(self):
        stack: list[Node] = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Split):
                stack.append(node.right)
                stack.append(node.left)

    def iter_splits(self):
        return (node for node in self.iter_nodes() if isinstance(node, Split))


@dataclass(frozen=True)
class GbdtModel:
    """An additive tree ensemble: score(x) = learning_rate * sum of trees."""

    trees: tuple[RegressionTree, ...]
    learning_rate: float
    feature_names: tuple[str, ...]
    gamma_max: int
    ndcg_truncation: int

    def predict_row(self, row: FeatureRow | Sequence[float | None]) -> float:
        values = row.values if isinstance(row, FeatureRow) else tuple(row)
        if len(values) != len(self.feature_names):
            raise SchemaError(
                f"row has {len(values)} features, model expects {len(self.feature_names)}"
            )
        return self.learning_rate * sum(t.predict_row(values) for t in self.trees)

    def predict(self, rows: Sequence[FeatureRow | Sequence[float | None]]) -> list[float]:
        return [self.predict_row(row) for row in rows]

    def split_count(self) -> int:
        return sum(sum(1 for _ in t.iter_splits()) for t in self.trees)


def rows_to_matrix(rows: Sequence[FeatureRow | Sequence[float | None]]) -> np.ndarray:
    """Stack feature rows into a float matrix, NaN marking missing values."""
    if not rows:
        return np.empty((0, 0))
    first = rows[0].values if isinstance(rows[0], FeatureRow) else rows[0]
    matrix = np.full((len(rows), len(first)), np.nan)
    for i, row in enumerate(rows):
        values = row.values if isinstance(row, FeatureRow) else row
        for j, v in enumerate(values):
            if not _is_missing(v):
                matrix[i, j] = v
    return matrix


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # 1 / (1 + exp(-x)) without overflow for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lambda_gradients(
    scores: Sequence[float],
    relevances: Sequence[int],
    p: int,
    sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-item first and second derivatives of the pairwise ranking loss.

    For every pair with relevance_i > relevance_j the pairwise gradient is
    -sigma * |delta NDCG from swapping i and j| / (1 + exp(sigma (s_i - s_j))),
    added to item i and subtracted from item j; the hessian accumulates the
    matching second-order weight on both items. Gradients of a group sum to
    zero by construction.
    """
    n = len(scores)
    if n != len(relevances):
        raise SchemaError(f"{n} scores but {len(relevances)} relevance labels")
    if n < 2:
        raise ValueError("lambda gradients need at least two items")
    rel = np.asarray(relevances, dtype=float)
    s = np.asarray(scores, dtype=float)

    grad = np.zeros(n)
    hess = np.zeros(n)
    top_rel = np.sort(rel)[::-1][:p]
    idcg = float(np.sum((np.exp2(top_rel) - 1.0) / np.log2(np.arange(2.0, top_rel.size + 2.0))))
    if idcg == 0.0:
        return grad, hess

    # Stable argsort of -s ranks by descending score with input position as
    # the tie-break, matching `ranking_order` without keys.
    order = np.argsort(-s, kind="stable")
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(1, n + 1)
    discount = np.where(rank <= p, 1.0 / np.log2(rank + 1.0), 0.0)

    gains = np.exp2(rel)
    pair_mask = rel[:, None] > rel[None, :]
    delta = (
        np.abs((gains[:, None] - gains[None, :]) * (discount[:, None] - discount[None, :]))
        / idcg
    )
    rho = _stable_sigmoid(-sigma * (s[:, None] - s[None, :]))
    lam = np.where(pair_mask, -sigma * delta * rho, 0.0)
    weight = np.where(pair_mask, sigma * sigma * delta * rho * (1.0 - rho), 0.0)

    grad = lam.sum(axis=1) - lam.sum(axis=0)
    hess = weight.sum(axis=1) + weight.sum(axis=0)
    return grad, hess


def _best_split(
    matrix: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    ordered_members: np.ndarray,
    min_leaf_count: int,
    reg_lambda: float,
) -> tuple[float, int, float, bool] | None:
    """The highest-gain (gain, feature, threshold, missing_goes_left) for one
    leaf, or None when no split satisfies the constraints with positive gain.

    `ordered_members` holds the leaf's row indices, one column per feature,
    each column pre-sorted by that feature's value with missing rows last.
    """
    n, n_features = ordered_members.shape
    if n < 2 * min_leaf_count or n_features == 0:
        return None
    columns = np.arange(n_features)
    sorted_vals = matrix[ordered_members, columns]
    cum_g = np.cumsum(grad[ordered_members], axis=0)
    cum_h = np.cumsum(hess[ordered_members], axis=0)
    total_g = cum_g[-1]
    total_h = cum_h[-1]
    parent_score = total_g * total_g / (total_h + reg_lambda)

    n_pres = n - np.isnan(sorted_vals).sum(axis=0)
    pres_end = np.maximum(n_pres - 1, 0)
    g_pres = np.take_along_axis(cum_g, pres_end[None, :], axis=0)[0]
    h_pres = np.take_along_axis(cum_h, pres_end[None, :], axis=0)[0]
    g_miss = total_g - g_pres
    h_miss = total_h - h_pres
    n_miss = n - n_pres

    def child_gains(gl, hl, gr, hr):
        return 0.5 * (
            gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_score
        )

    # Boundary candidates: k rows left, for k where sorted value k-1 < k (both
    # present; comparisons against NaN are False). Shape (n-1, n_features).
    lo = sorted_vals[:-1]
    hi = sorted_vals[1:]
    is_boundary = hi > lo
    with np.errstate(invalid="ignore"):
        mid = (lo + hi) / 2.0
        # A midpoint that rounds onto the upper value would leak it left.
        mid = np.where(mid < hi, mid, lo)
    ks = np.arange(1, n)[:, None]
    gl = cum_g[:-1]
    hl = cum_h[:-1]

    # Option A: missing rows routed right. The right child then holds every
    # row not in the left present prefix, n - k rows in total.
    gain_right = child_gains(gl, hl, total_g - gl, total_h - hl)
    valid_right = is_boundary & (ks >= min_leaf_count) & (n - ks >= min_leaf_count)
    # Option B: missing rows routed left.
    gain_left = child_gains(gl + g_miss, hl + h_miss, g_pres - gl, h_pres - hl)
    valid_left = (
        is_boundary
        & (n_miss > 0)
        & (ks + n_miss >= min_leaf_count)
        & (n_pres - ks >= min_leaf_count)
    )
    # Present-vs-missing split: every present row left, missing right, with
    # the largest present value as threshold. One candidate per feature,
    # ordered after the boundary candidates (it has the largest threshold).
    gain_extra = child_gains(g_pres, h_pres, g_miss, h_miss)
    valid_extra = (n_miss >= min_leaf_count) & (n_pres >= min_leaf_count)

    # Candidate tensor in (feature, threshold position, missing-left) order:
    # C-order ravel makes the first argmax hit the smallest feature index,
    # then the smallest threshold, then missing-goes-right before left.
    neg_inf = -np.inf
    gains = np.full((n_features, n, 2), neg_inf)
    gains[:, : n - 1, 0] = np.where(valid_right, gain_right, neg_inf).T
    gains[:, : n - 1, 1] = np.where(valid_left, gain_left, neg_inf).T
    gains[:, n - 1, 0] = np.where(valid_extra, gain_extra, neg_inf)

    flat = int(np.argmax(gains))
    best_gain = float(gains.ravel()[flat])
    if not best_gain > 0.0:
        return None
    feature, rest = divmod(flat, 2 * n)
    position, missing_left = divmod(rest, 2)
    if position < n - 1:
        threshold = float(mid[position, feature])
    else:
        threshold = float(sorted_vals[n_pres[feature] - 1, feature])
    return best_gain, feature, threshold, bool(missing_left)


def fit_tree(
    rows: Sequence[FeatureRow] | np.ndarray,
    gradients: Sequence[float] | np.ndarray,
    hessians: Sequence[float] | np.ndarray,
    max_leaves: int,
    min_leaf_count: int,
    reg_lambda: float = 1.0,
) -> RegressionTree:
    """Grow one regression tree leaf-wise on gradient/hessian targets.

    The leaf with the largest achievable gain is split first (ties: oldest
    leaf), until `max_leaves` is reached or no leaf has a positive-gain
    split with at least `min_leaf_count` rows per child. Leaf values are the
    Newton step -sum(grad) / (sum(hess) + reg_lambda).
    """
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")
    if min_leaf_count < 1:
        raise ValueError("min_leaf_count must be >= 1")
    matrix = rows if isinstance(rows, np.ndarray) else rows_to_matrix(rows)
    grad = np.asarray(gradients, dtype=float)
    hess = np.asarray(hessians, dtype=float)
    n = matrix.shape[0]
    if n == 0:
        raise DataError("cannot fit a tree on zero rows")
    if grad.shape != (n,) or hess.shape != (n,):
        raise SchemaError("gradients/hessians must match the number of rows")

    # Row indices sorted per feature column, missing (NaN) rows last; split
    # partitions inherit these orderings, so each column is sorted only once.
    root_order = np.argsort(matrix, axis=0, kind="stable")
    n_features = matrix.shape[1]
    if n_features == 0:
        root_order = np.zeros((n, 0), dtype=int)

    leaves: dict[int, np.ndarray] = {0: root_order}
    pending: dict[int, tuple[float, int, float, bool] | None] = {
        0: _best_split(matrix, grad, hess, leaves[0], min_leaf_count, reg_lambda)
        if max_leaves > 1
        else None
    }
    splits: dict[int, tuple[int, float, bool, float, int, int]] = {}
    next_id = 1
    in_left = np.zeros(n, dtype=bool)

    while len(leaves) < max_leaves:
        growable = [(lid, cand) for lid, cand in pending.items() if cand is not None]
        if not growable:
            break
        lid, (gain, feature, threshold, missing_left) = min(
            growable, key=lambda item: (-item[1][0], item[0])
        )
        ordered = leaves.pop(lid)
        pending.pop(lid)
        members = ordered[:, 0] if n_features else np.empty(0, dtype=int)
        col = matrix[members, feature]
        miss = np.isnan(col)
        goes_left = np.where(miss, missing_left, col <= threshold)
        in_left[members] = goes_left
        member_goes_left = in_left[ordered]
        left_count = int(goes_left.sum())
        left_ordered = ordered.T[member_goes_left.T].reshape(n_features, left_count).T
        right_ordered = (
            ordered.T[~member_goes_left.T].reshape(n_features, ordered.shape[0] - left_count).T
        )
        left_id, right_id = next_id, next_id + 1
        next_id += 2
        leaves[left_id] = left_ordered
        leaves[right_id] = right_ordered
        splits[lid] = (feature, threshold, missing_left, gain, left_id, right_id)
        if len(leaves) < max_leaves:
            for child in (left_id, right_id):
                pending[child] = _best_split(
                    matrix, grad, hess, leaves[child], min_leaf_count, reg_lambda
                )

    def build(node_id: int) -> Node:
        if node_id in splits:
            feature, threshold, missing_left, gain, left_id, right_id = splits[node_id]
            return Split(feature, threshold, missing_left, gain, build(left_id), build(right_id))
        ordered = leaves[node_id]
        members = ordered[:, 0] if n_features else np.arange(n)
        g = float(grad[members].sum())
        h = float(hess[members].sum())
        return Leaf(-g / (h + reg_lambda))

    return RegressionTree(build(0))


def train(
    dataset: RankingDataset,
    config: TrainConfig = TrainConfig(),
    on_round: Callable[[int, float], None] | None = None,
) -> GbdtModel:
    """Boost `config.num_trees` trees with per-group LambdaRank gradients.

    Scores start at zero; each round computes gradients per ranking group at
    truncation `gamma_max` (the full labeled prefix), fits one tree over all
    rows, and advances scores by learning_rate times the tree output.
    `on_round(round_index, mean_training_ndcg)` is invoked after each round
    when supplied; the mean uses the reporting truncation `ndcg_truncation`.
    Boosting stops early if a round produces an empty tree (zero gradients).
    """
    groups = dataset.groups(config.gamma_max)
    if not groups:
        raise DataError("dataset has no ranking groups")
    for group in groups:
        if len(group.candidates) < 2:
            raise DataError(
                f"group {group.task_lang}: training needs >= 2 candidates, "
                f"has {len(group.candidates)}"
            )
    if all(rel == 0 for group in groups for rel in group.relevances):
        raise DataError("degenerate dataset: every relevance label is zero")

    all_rows: list[FeatureRow] = []
    slices: list[tuple[int, int]] = []
    rel_lists: list[list[int]] = []
    key_lists: list[tuple[str, ...]] = []
    for group in groups:
        start = len(all_rows)
        all_rows.extend(c.features for c in group.candidates)
        slices.append((start, len(all_rows)))
        rel_lists.append(list(group.relevances))
        key_lists.append(group.transfer_langs)
    matrix = rows_to_matrix(all_rows)
    scores = np.zeros(len(all_rows))

    trees: list[RegressionTree] = []
    for round_index in range(config.num_trees):
        grad = np.zeros(len(all_rows))
        hess = np.zeros(len(all_rows))
        for (start, end), rels in zip(slices, rel_lists):
            g, h = lambda_gradients(
                scores[start:end], rels, p=config.gamma_max, sigma=config.sigma
            )
            grad[start:end] = g
            hess[start:end] = h
        tree = fit_tree(
            matrix, grad, hess, config.max_leaves, config.min_leaf_count, config.reg_lambda
        )
        if isinstance(tree.root, Leaf) and tree.root.value == 0.0:
            break
        trees.append(tree)
        scores += config.learning_rate * tree.predict_matrix(matrix)
        if on_round is not None:
            fold_ndcgs = [
                ndcg_at_p(
                    list(scores[start:end]), rels, config.ndcg_truncation, keys=keys
                )
                for (start, end), rels, keys in zip(slices, rel_lists, key_lists)
            ]
            on_round(round_index, sum(fold_ndcgs) / len(fold_ndcgs))

    return GbdtModel(
        trees=tuple(trees),
        learning_rate=config.learning_rate,
        feature_names=dataset.feature_names,
        gamma_max=config.gamma_max,
        ndcg_truncation=config.ndcg_truncation,
    )


IMPORTANCE_KINDS = ("split_count", "gain")


def feature_importance(model: GbdtModel, kind: str = "split_count") -> dict[str, float]:
    """Per-feature importance normalized to sum to 1.

    `split_count` counts how often a feature is chosen as the splitting
    feature across all trees; `gain` weighs each split by its gain instead.
    Ordered by descending weight, then feature name.
    """
    if kind not in IMPORTANCE_KINDS:
        raise ValueError(f"kind must be one of {IMPORTANCE_KINDS}, got {kind!r}")
    totals = {name: 0.0 for name in model.feature_names}
    for tree in model.trees:
        for split in tree.iter_splits():
            name = model.feature_names[split.feature]
            totals[name] += 1.0 if kind == "split_count" else split.gain
    total = sum(totals.values())
    if total <= 0.0:
        raise DataError("feature importance undefined for a model with no splits")
    items = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return {name: value / total for name, value in items}


def export_trees(model: GbdtModel, fmt: str = "text") -> str:
    """Render every tree as indented text or as graphviz DOT."""
    if fmt == "text":
        blocks = []
        for i, tree in enumerate(model.trees):
            lines = [f"tree {i}"]
            lines.extend("  " + line for line in _text_lines(tree.root, model.feature_names))
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"
    if fmt == "dot":
        return "\n".join(
            _dot_block(i, tree, model.feature_names) for i, tree in enumerate(model.trees)
        )
    raise ValueError(f"unknown export format {fmt!r}; expected 'text' or 'dot'")


def _text_lines(node: Node, feature_names: Sequence[str]) -> list[str]:
    if isinstance(node, Leaf):
        return [f"leaf {node.value:g}"]
    missing = "yes" if node.missing_goes_left else "no"
    lines = [f"{feature_names[node.feature]} <= {node.threshold:g} (missing: {missing})"]
    for label, child in (("yes", node.left), ("no", node.right)):
        sub = _text_lines(child, feature_names)
        lines.append(f"  {label} -> {sub[0]}")
        lines.extend("  " + extra for extra in sub[1:])
    return lines


def _dot_block(index: int, tree: RegressionTree, feature_names: Sequence[str]) -> str:
    lines = [f"digraph tree_{index} {{", "  node [shape=box];"]
    counter = [0]

    def walk(node: Node) -> int:
        node_id = counter[0]
        counter[0] += 1
        if isinstance(node, Leaf):
            lines.append(f'  n{node_id} [label="leaf {node.value:g}"];')
            return node_id
        label = f"{feature_names[node.feature]} <= {node.threshold:g}"
        lines.append(f'  n{node_id} [label="{label}"];')
        left_id = walk(node.left)
        right_id = walk(node.right)
        yes_extra = ", missing" if node.missing_goes_left else ""
        no_extra = "" if node.missing_goes_left else ", missing"
        lines.append(f'  n{node_id} -> n{left_id} [label="yes{yes_extra}"];')
        lines.append(f'  n{node_id} -> n{right_id} [label="no{no_extra}"];')
        return node_id

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _node_to_dict(node: Node, feature_names: Sequence[str]) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.value}
    return {
        "split": feature_names[node.feature],
        "threshold": node.threshold,
        "missing_goes_left": node.missing_goes_left,
        "gain": node.gain,
        "yes": _node_to_dict(node.left, feature_names),
        "no": _node_to_dict(node.right, feature_names),
    }


def _node_from_dict(data: dict, name_to_index: dict[str, int]) -> Node:
    if "leaf" in data:
        return Leaf(float(data["leaf"]))
    try:
        feature = name_to_index[data["split"]]
        return Split(
            feature=feature,
            threshold=float(data["threshold"]),
            missing_goes_left=bool(data["missing_goes_left"]),
            gain=float(data["gain"]),
            left=_node_from_dict(data["yes"], name_to_index),
            right=_node_from_dict(data["no"], name_to_index),
        )
    except KeyError as exc:
        raise DataError(f"malformed tree node: missing key {exc}") from None


def model_to_dict(model: GbdtModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "learning_rate": model.learning_rate,
        "gamma_max": model.gamma_max,
        "ndcg_truncation": model.ndcg_truncation,
        "feature_names": list(model.feature_names),
        "trees": [_node_to_dict(t.root, model.feature_names) for t in model.trees],
    }


def model_from_dict(data: dict) -> GbdtModel:
    if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
        raise DataError(f"not a {MODEL_FORMAT} model file")
    if data.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(
            f"unsupported model version {data.get('version')!r}; "
            f"this build reads version {MODEL_FORMAT_VERSION}"
        )
    try:
        feature_names = tuple(str(n) for n in data["feature_names"])
        name_to_index = {name: i for i, name in enumerate(feature_names)}
        trees = tuple(
            RegressionTree(_node_from_dict(t, name_to_index)) for t in data["trees"]
        )
        return GbdtModel(
            trees=trees,
            learning_rate=float(data["learning_rate"]),
            feature_names=feature_names,
            gamma_max=int(data["gamma_max"]),
            ndcg_truncation=int(data["ndcg_truncation"]),
        )
    except KeyError as exc:
        raise DataError(f"malformed model file: missing key {exc}") from None


def save_model(model: GbdtModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> GbdtModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid model JSON: {exc}") from exc
    return model_from_dict(data)
