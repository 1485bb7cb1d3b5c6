"""Piecewise-constant tree surrogates and their tile partitions.

Trees are grown with scikit-learn's CART implementations and then copied into
plain float64 node arrays owned by this module.  Each leaf of a tree is a
*tile*: a hyperrectangle ``(lower, upper]`` over the numeric columns times a
set of allowed categories for every categorical column.  Points equal to a
split threshold go to the lower side, so a tile contains ``x`` when
``lower < x <= upper`` in every numeric dimension.

Categorical columns are one-hot encoded before fitting, which makes every
categorical split a one-vs-rest test on a single category.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.ensemble import ExtraTreesRegressor, RandomForestRegressor
from sklearn.tree import DecisionTreeRegressor

from .dataset import Column, Dataset, validate_matrix
from .errors import InvalidInputError

TREE_KINDS = ("regression_tree", "random_forest", "extra_trees")


@dataclass(frozen=True)
class TreeParams:
    """How to grow the surrogate.

    ``max_features`` defaults to a third of the (one-hot) design columns,
    rounded up, for ``random_forest`` and to all columns otherwise.
    """

    kind: str = "regression_tree"
    n_trees: int = 1
    max_depth: int | None = None
    min_samples_leaf: int = 1
    rng_seed: int = 0
    max_features: int | float | None = None

    def __post_init__(self):
        if self.kind not in TREE_KINDS:
            raise InvalidInputError(f"unknown tree kind {self.kind!r}")
        if int(self.n_trees) != self.n_trees or self.n_trees < 1:
            raise InvalidInputError("n_trees must be a positive integer")
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidInputError("max_depth must be positive")
        if self.min_samples_leaf < 1:
            raise InvalidInputError("min_samples_leaf must be positive")

    @property
    def bootstrap(self) -> bool:
        return self.kind == "random_forest"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf, "rng_seed": self.rng_seed,
                "max_features": self.max_features}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        return cls(**d)


@dataclass(frozen=True)
class Tile:
    """One leaf region with its constant value.

    ``lower``/``upper`` hold the numeric bounds (``+-inf`` when open; ignored
    for categorical dimensions) and ``categories`` maps each categorical
    dimension to the set of allowed category codes.
    """

    lower: np.ndarray
    upper: np.ndarray
    categories: dict
    value: float

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        for d, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if d in self.categories:
                if int(x[d]) not in self.categories[d]:
                    return False
            elif not (lo < x[d] <= hi):
                return False
        return True


@dataclass(frozen=True)
class TileArrays:
    """Stacked tiles of one tree, laid out for vectorized probability sums."""

    lower: np.ndarray      # (M, D)
    upper: np.ndarray      # (M, D)
    values: np.ndarray     # (M,)
    masks: dict            # categorical dim -> (M, C) bool
    bounds: dict           # numeric dim -> (unique bounds, lower idx, upper idx)
    lower_index: np.ndarray  # (M, len(bounds)) into the concatenated bounds
    upper_index: np.ndarray

    @property
    def n_tiles(self) -> int:
        return len(self.values)


class Tree:
    """A fitted tree stored as flat node arrays.

    ``feature[n]`` is the column tested at node ``n`` (``-1`` at leaves).  For
    numeric columns a point goes left when ``x <= threshold[n]``; for
    categorical columns it goes right when ``x == category[n]``.
    """

    def __init__(self, columns: Sequence[Column], feature, threshold, category,
                 left, right, value):
        self.columns = tuple(columns)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.category = np.asarray(category, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        n = len(self.feature)
        if not all(len(a) == n for a in (self.threshold, self.category, self.left,
                                         self.right, self.value)):
            raise InvalidInputError("node arrays must have equal length")

    @classmethod
    def constant(cls, columns, value: float) -> "Tree":
        return cls(columns, [-1], [np.nan], [-1], [-1], [-1], [value])

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for n in range(self.n_nodes):
            if self.feature[n] >= 0:
                depth[self.left[n]] = depth[self.right[n]] = depth[n] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Index of the leaf node reached by each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            f = self.feature[nd]
            x = X[r, f]
            cat = self.category[nd]
            go_right = np.where(cat >= 0, x == cat, x > self.threshold[nd])
            node[r] = np.where(go_right, self.right[nd], self.left[nd])
            active[r] = self.feature[node[r]] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    # -- tiles ---------------------------------------------------------------

    @cached_property
    def _leaf_regions(self):
        D = len(self.columns)
        cat_dims = [d for d, c in enumerate(self.columns) if c.is_categorical]
        regions = []
        stack = [(0, np.full(D, -np.inf), np.full(D, np.inf),
                  {d: np.ones(len(self.columns[d].categories), dtype=bool) for d in cat_dims})]
        while stack:
            n, lo, hi, allowed = stack.pop()
            f = self.feature[n]
            if f < 0:
                regions.append((n, lo, hi, allowed))
                continue
            if self.columns[f].is_categorical:
                c = self.category[n]
                left_allowed = dict(allowed)
                left_allowed[f] = allowed[f].copy()
                left_allowed[f][c] = False
                right_allowed = dict(allowed)
                only = np.zeros_like(allowed[f])
                only[c] = allowed[f][c]
                right_allowed[f] = only
                children = [(self.right[n], lo, hi, right_allowed),
                            (self.left[n], lo, hi, left_allowed)]
            else:
                t = self.threshold[n]
                lhi = hi.copy()
                lhi[f] = min(hi[f], t)
                rlo = lo.copy()
                rlo[f] = max(lo[f], t)
                children = [(self.right[n], rlo, hi, allowed), (self.left[n], lo, lhi, allowed)]
            for child in children:
                _, clo, chi, callowed = child
                # unreachable regions carry no probability and contain no points
                if np.any(clo >= chi) or any(not m.any() for m in callowed.values()):
                    continue
                stack.append(child)
        regions.sort(key=lambda r: r[0])
        return regions

    def tiles(self) -> list[Tile]:
        out = []
        for n, lo, hi, allowed in self._leaf_regions:
            cats = {d: frozenset(np.flatnonzero(m).tolist()) for d, m in allowed.items()}
            out.append(Tile(lo.copy(), hi.copy(), cats, float(self.value[n])))
        return out

    @cached_property
    def tile_arrays(self) -> TileArrays:
        regions = self._leaf_regions
        D = len(self.columns)
        lower = np.array([r[1] for r in regions]).reshape(-1, D)
        upper = np.array([r[2] for r in regions]).reshape(-1, D)
        values = np.array([self.value[r[0]] for r in regions], dtype=float)
        masks = {}
        bounds = {}
        for d, col in enumerate(self.columns):
            if col.is_categorical:
                masks[d] = np.array([r[3][d] for r in regions]).reshape(len(regions), -1)
                continue
            if np.all(np.isinf(lower[:, d]) & np.isinf(upper[:, d])):
                continue
            uniq, inv = np.unique(np.concatenate([lower[:, d], upper[:, d]]), return_inverse=True)
            M = len(regions)
            bounds[d] = (uniq, inv[:M], inv[M:])
        M = len(regions)
        lower_index = np.zeros((M, len(bounds)), dtype=np.int64)
        upper_index = np.zeros((M, len(bounds)), dtype=np.int64)
        offset = 0
        for j, (uniq, lo_idx, hi_idx) in enumerate(bounds.values()):
            lower_index[:, j] = lo_idx + offset
            upper_index[:, j] = hi_idx + offset
            offset += len(uniq)
        for a in (lower, upper, values, lower_index, upper_index):
            a.setflags(write=False)
        return TileArrays(lower, upper, values, masks, bounds, lower_index, upper_index)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        def num(v):
            return None if not math.isfinite(v) else float(v)

        tiles = []
        for t in self.tiles():
            entry = {"value": t.value, "lower": [], "upper": []}
            for d, col in enumerate(self.columns):
                if col.is_categorical:
                    entry["lower"].append(None)
                    entry["upper"].append(None)
                else:
                    entry["lower"].append(num(t.lower[d]))
                    entry["upper"].append(num(t.upper[d]))
            if t.categories:
                entry["categories"] = {
                    self.columns[d].name: [self.columns[d].categories[c] for c in sorted(s)]
                    for d, s in t.categories.items()}
            tiles.append(entry)
        nodes = {
            "feature": self.feature.tolist(),
            "threshold": [num(v) for v in self.threshold],
            "category": self.category.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }
        return {"tiles": tiles, "nodes": nodes}

    @classmethod
    def from_dict(cls, columns, d: dict) -> "Tree":
        n = d["nodes"]
        thr = [np.nan if v is None else v for v in n["threshold"]]
        return cls(columns, n["feature"], thr, n["category"], n["left"], n["right"], n["value"])


@dataclass
class Forest:
    """An ensemble of fitted trees over a fixed list of columns."""

    columns: tuple[Column, ...]
    trees: list[Tree]
    params: TreeParams = field(default_factory=TreeParams)
    lower_bound: np.ndarray | None = None
    upper_bound: np.ndarray | None = None

    def __post_init__(self):
        self.columns = tuple(self.columns)
        if not self.trees:
            raise InvalidInputError("a forest needs at least one tree")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_dims(self) -> int:
        return len(self.columns)

    def check_points(self, X) -> np.ndarray:
        return validate_matrix(self.columns, X)

    def predict_per_tree(self, X) -> np.ndarray:
        """Leaf values, shape ``(n_trees, n_points)``."""
        X = self.check_points(X)
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X):
        """Mean leaf value over trees; scalar for a single point."""
        single = np.ndim(X) == 1
        out = self.predict_per_tree(X).mean(axis=0)
        return float(out[0]) if single else out

    def leaf_range(self) -> tuple[float, float]:
        vals = np.concatenate([t.tile_arrays.values for t in self.trees])
        return float(vals.min()), float(vals.max())

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None else [float(x) for x in v]

        return {
            "format": "robustree.forest/1",
            "columns": [c.to_dict() for c in self.columns],
            "params": self.params.to_dict(),
            "lower_bound": num(self.lower_bound),
            "upper_bound": num(self.upper_bound),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        columns = tuple(Column.from_dict(c) for c in d["columns"])
        lb = d.get("lower_bound")
        ub = d.get("upper_bound")
        return cls(columns, [Tree.from_dict(columns, t) for t in d["trees"]],
                   TreeParams.from_dict(d.get("params", {})),
                   None if lb is None else np.asarray(lb, dtype=float),
                   None if ub is None else np.asarray(ub, dtype=float))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "Forest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def extract_tiles(tree: Tree) -> list[Tile]:
    return tree.tiles()


def predict(forest: Forest, x):
    return forest.predict(x)


# -- fitting -------------------------------------------------------------------

def _design(columns: Sequence[Column], X: np.ndarray):
    """One-hot expand categorical columns.

    Returns the design matrix and, per design column, ``(column, category)``
    with ``category = -1`` for numeric columns.
    """
    blocks, origin = [], []
    for d, col in enumerate(columns):
        if col.is_categorical:
            codes = X[:, d].astype(int)
            for c in range(len(col.categories)):
                blocks.append((codes == c).astype(float))
                origin.append((d, c))
        else:
            blocks.append(X[:, d])
            origin.append((d, -1))
    return np.column_stack(blocks), origin


def _estimator(params: TreeParams, n_design: int):
    common = dict(max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf)
    if params.kind == "random_forest":
        mf = params.max_features if params.max_features is not None else max(1, math.ceil(n_design / 3))
        return RandomForestRegressor(n_estimators=params.n_trees, bootstrap=True, max_features=mf,
                                     random_state=params.rng_seed, n_jobs=1, **common)
    if params.kind == "extra_trees":
        mf = params.max_features if params.max_features is not None else 1.0
        return ExtraTreesRegressor(n_estimators=params.n_trees, bootstrap=False, max_features=mf,
                                   random_state=params.rng_seed, n_jobs=1, **common)
    seeds = np.random.SeedSequence(params.rng_seed).generate_state(params.n_trees)
    return [DecisionTreeRegressor(max_features=params.max_features, random_state=int(s), **common)
            for s in seeds]


def _snap_thresholds(sk_tree, design: np.ndarray, thresholds: np.ndarray, numeric: np.ndarray):
    """Move thresholds so that float64 comparisons route every training row
    exactly as scikit-learn's float32 comparisons did."""
    t = sk_tree.tree_
    X32 = design.astype(np.float32)
    path = sk_tree.decision_path(X32).tocsc()
    out = thresholds.copy()
    for n in np.flatnonzero(t.children_left >= 0):
        j = t.feature[n]
        if not numeric[j]:
            continue
        li = path.indices[path.indptr[t.children_left[n]]:path.indptr[t.children_left[n] + 1]]
        ri = path.indices[path.indptr[t.children_right[n]]:path.indptr[t.children_right[n] + 1]]
        if len(li) == 0 or len(ri) == 0:
            continue
        a, b = design[li, j].max(), design[ri, j].min()
        if a <= out[n] < b or not a < b:
            continue
        mid = 0.5 * (a + b)
        out[n] = mid if a <= mid < b else a
    return out


def _convert(sk_tree, columns, origin, design) -> Tree:
    t = sk_tree.tree_
    feats = t.feature.astype(np.int64)
    internal = t.children_left >= 0
    numeric = np.array([c < 0 for _, c in origin])
    thr = _snap_thresholds(sk_tree, design, t.threshold.astype(float), numeric)
    feature = np.full(t.node_count, -1, dtype=np.int64)
    category = np.full(t.node_count, -1, dtype=np.int64)
    threshold = np.full(t.node_count, np.nan)
    for n in np.flatnonzero(internal):
        d, c = origin[feats[n]]
        feature[n] = d
        if c >= 0:
            category[n] = c
        else:
            threshold[n] = thr[n]
    values = t.value[:, 0, 0].astype(float)
    return Tree(columns, feature, threshold, category, t.children_left, t.children_right, values)


def fit(dataset: Dataset, params: TreeParams | None = None) -> Forest:
    """Grow ``params.n_trees`` trees on ``dataset``."""
    params = params or TreeParams()
    if len(dataset) == 0:
        raise InvalidInputError("cannot fit on an empty dataset")
    if not np.all(np.isfinite(dataset.y)):
        raise InvalidInputError("targets must be finite")
    design, origin = _design(dataset.columns, dataset.X)
    est = _estimator(params, design.shape[1])
    if isinstance(est, list):
        for e in est:
            e.fit(design, dataset.y)
        sk_trees = est
    else:
        est.fit(design, dataset.y)
        sk_trees = est.estimators_
    trees = [_convert(e, dataset.columns, origin, design) for e in sk_trees]
    numeric = [d for d, c in enumerate(dataset.columns) if not c.is_categorical]
    lb = np.full(len(dataset.columns), np.nan)
    ub = np.full(len(dataset.columns), np.nan)
    lb[numeric] = dataset.X[:, numeric].min(axis=0)
    ub[numeric] = dataset.X[:, numeric].max(axis=0)
    return Forest(dataset.columns, trees, params, lb, ub)


def with_params(params: TreeParams, **changes) -> TreeParams:
    return replace(params, **changes)
