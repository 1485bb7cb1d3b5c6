"""Closed-form robustness estimates for tree surrogates.

For a tree with tiles ``T_m`` and leaf values ``f_m`` the expected output at a
query ``x`` under independent per-dimension input noise is

    E[f] = sum_m f_m * prod_d P(x~_d in T_m,d | x)

where each factor is a CDF difference (numeric dimensions) or a sum of
category probabilities (categorical dimensions).  Forests average the
per-tree expectations and per-tree second moments.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, read_table
from .errors import ConsistencyError, InvalidInputError
from ._kernels import empty_weights, tile_moments
from .noise import CategoricalSimplex, Delta, NoiseModel
from .trees import Forest, Tile, Tree

# Rows per block; fixed so results do not depend on how blocks are scheduled.
BLOCK_ELEMENTS = 4_000_000
VARIANCE_TOLERANCE = 1e-9


class ExtrapolationWarning(UserWarning):
    """A query lies outside the range spanned by the training data."""


@dataclass(frozen=True)
class RobustEstimate:
    """Robust merit of one query (array-valued fields for a batch).

    ``per_tree`` has the tree axis first.
    """

    expectation: float | np.ndarray
    output_std: float | np.ndarray
    expectation_std: float | np.ndarray
    per_tree: np.ndarray

    def __len__(self) -> int:
        return int(np.size(self.expectation))

    def __getitem__(self, i) -> "RobustEstimate":
        return RobustEstimate(float(np.asarray(self.expectation)[i]),
                              float(np.asarray(self.output_std)[i]),
                              float(np.asarray(self.expectation_std)[i]),
                              np.asarray(self.per_tree)[:, i])


def _check_noise(forest: Forest, noise: Sequence[NoiseModel]) -> list[NoiseModel]:
    noise = list(noise)
    if len(noise) != forest.n_dims:
        raise InvalidInputError(f"{len(noise)} noise models for {forest.n_dims} dimensions")
    for col, m in zip(forest.columns, noise):
        if col.is_categorical:
            if isinstance(m, Delta):
                continue
            if not isinstance(m, CategoricalSimplex):
                raise InvalidInputError(f"column {col.name!r} is categorical; needs categorical noise")
            if tuple(m.categories) != tuple(col.categories):
                raise InvalidInputError(f"noise vocabulary does not match column {col.name!r}")
        elif m.is_categorical:
            raise InvalidInputError(f"column {col.name!r} is numeric; got categorical noise")
    return noise


def _as_queries(forest: Forest, queries) -> tuple[np.ndarray, bool]:
    single = np.ndim(queries) == 1
    Q = forest.check_points(queries)
    return Q, single


def _warn_extrapolation(forest: Forest, Q: np.ndarray) -> None:
    if forest.lower_bound is None:
        return
    lb, ub = forest.lower_bound, forest.upper_bound
    numeric = ~np.isnan(lb)
    outside = (Q[:, numeric] < lb[numeric]) | (Q[:, numeric] > ub[numeric])
    if outside.any():
        warnings.warn(f"{int(outside.any(axis=1).sum())} queries lie outside the training range; "
                      "the surrogate is constant there", ExtrapolationWarning, stacklevel=3)


def _categorical_weights(ta, Q: np.ndarray, noise) -> np.ndarray:
    """Categorical probability factors, shape ``(M, S)``."""
    S = len(Q)
    if not ta.masks:
        return empty_weights(S)
    W = np.ones((ta.n_tiles, S))
    for d, mask in ta.masks.items():
        model = noise[d]
        if isinstance(model, Delta):
            W *= mask[:, Q[:, d].astype(int)]
        else:
            W *= mask.astype(float) @ model.probability_table(Q[:, d].astype(int)).T
    return W


def _cdf_table(ta, Q: np.ndarray, noise) -> np.ndarray:
    """CDF at every distinct tile bound (rows, dims stacked) for every query
    (columns)."""
    S = len(Q)
    rows = []
    for d, (uniq, _, _) in ta.bounds.items():
        F = noise[d].cdf(uniq[:, None], Q[None, :, d], context=Q)
        rows.append(np.broadcast_to(F, (len(uniq), S)))
    if not rows:
        return np.zeros((0, S))
    return np.ascontiguousarray(np.concatenate(rows, axis=0), dtype=float)


def tile_probabilities(tree: Tree, Q: np.ndarray, noise: Sequence[NoiseModel]) -> np.ndarray:
    """Probability of landing in every tile of ``tree``, shape ``(S, M)``."""
    ta = tree.tile_arrays
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    W = _categorical_weights(ta, Q, noise)
    P = W if W.shape[0] else np.ones((ta.n_tiles, len(Q)))
    F = _cdf_table(ta, Q, noise)
    for j in range(ta.lower_index.shape[1]):
        P = P * np.clip(F[ta.upper_index[:, j]] - F[ta.lower_index[:, j]], 0.0, 1.0)
    return P.T


def _moments_block(forest: Forest, Q: np.ndarray, noise) -> tuple[np.ndarray, np.ndarray]:
    T = forest.n_trees
    E = np.empty((T, len(Q)))
    E2 = np.empty((T, len(Q)))
    for t, tree in enumerate(forest.trees):
        ta = tree.tile_arrays
        tile_moments(_cdf_table(ta, Q, noise), ta.lower_index, ta.upper_index, ta.values,
                     _categorical_weights(ta, Q, noise), E[t], E2[t])
    return E, E2


def _blocks(forest: Forest, S: int) -> list[slice]:
    m = max(t.tile_arrays.n_tiles for t in forest.trees)
    step = max(1, BLOCK_ELEMENTS // max(m, 1))
    return [slice(i, min(i + step, S)) for i in range(0, S, step)]


def per_tree_moments(forest: Forest, queries, noise: Sequence[NoiseModel], threads: int = 1):
    """Per-tree first and second moments, each of shape ``(n_trees, S)``."""
    Q, _ = _as_queries(forest, queries)
    noise = _check_noise(forest, noise)
    _warn_extrapolation(forest, Q)
    blocks = _blocks(forest, len(Q))
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda s: _moments_block(forest, Q[s], noise), blocks))
    else:
        parts = [_moments_block(forest, Q[s], noise) for s in blocks]
    if not parts:
        return np.empty((forest.n_trees, 0)), np.empty((forest.n_trees, 0))
    return (np.concatenate([p[0] for p in parts], axis=1),
            np.concatenate([p[1] for p in parts], axis=1))


def tile_probability(tile: Tile, query, noise: Sequence[NoiseModel]) -> float:
    """Probability that a noisy realization of ``query`` falls in ``tile``."""
    query = np.asarray(query, dtype=float)
    noise = list(noise)
    if not (len(noise) == len(query) == len(tile.lower)):
        raise InvalidInputError("tile, query and noise dimensions differ")
    p = 1.0
    for d, model in enumerate(noise):
        if d in tile.categories:
            allowed = tile.categories[d]
            if isinstance(model, Delta):
                p *= float(int(query[d]) in allowed)
            else:
                row = model.probability_table(int(query[d]))
                p *= float(sum(row[c] for c in allowed))
        else:
            p *= float(model.interval_probability(tile.lower[d], tile.upper[d], query[d],
                                                  context=query))
    return min(max(p, 0.0), 1.0)


def _squeeze(a, single):
    return float(a[0]) if single else a


def expectation(forest: Forest, queries, noise: Sequence[NoiseModel], threads: int = 1):
    """Expected surrogate output under input noise (scalar for one query)."""
    E, _ = per_tree_moments(forest, queries, noise, threads)
    return _squeeze(E.mean(axis=0), np.ndim(queries) == 1)


def second_moment(forest: Forest, queries, noise: Sequence[NoiseModel], threads: int = 1):
    """Mean over trees of ``E[f_t^2]``."""
    _, E2 = per_tree_moments(forest, queries, noise, threads)
    return _squeeze(E2.mean(axis=0), np.ndim(queries) == 1)


def pooled_std(E: np.ndarray, E2: np.ndarray) -> np.ndarray:
    """Output standard deviation from per-tree moments (tree axis first)."""
    mean = E.mean(axis=0)
    var = E2.mean(axis=0) - mean**2
    tol = VARIANCE_TOLERANCE * np.maximum(1.0, E2.mean(axis=0))
    if np.any(var < -tol):
        raise ConsistencyError(f"negative variance {var.min():.3e} beyond rounding tolerance")
    return np.sqrt(np.maximum(var, 0.0))


def estimate(forest: Forest, queries, noise: Sequence[NoiseModel], threads: int = 1) -> RobustEstimate:
    """Expectation, output spread and across-tree spread at the queries."""
    single = np.ndim(queries) == 1
    E, E2 = per_tree_moments(forest, queries, noise, threads)
    mean = E.mean(axis=0)
    std = pooled_std(E, E2)
    spread = E.std(axis=0, ddof=1) if forest.n_trees > 1 else np.zeros_like(mean)
    if single:
        return RobustEstimate(float(mean[0]), float(std[0]), float(spread[0]), E[:, 0])
    return RobustEstimate(mean, std, spread, E)


def lower_confidence_expectation(est: RobustEstimate, z: float = 1.96):
    """``expectation - z * expectation_std``."""
    if z < 0:
        raise InvalidInputError("z must be non-negative")
    return est.expectation - z * est.expectation_std


@dataclass(frozen=True)
class Reweighting:
    """Robust merits of every row of a dataset."""

    estimates: RobustEstimate
    best_index: int
    worst_index: int

    def __len__(self) -> int:
        return len(self.estimates)

    def rows(self) -> list[RobustEstimate]:
        return [self.estimates[i] for i in range(len(self))]


def reweight(dataset: Dataset, forest: Forest, noise: Sequence[NoiseModel],
             threads: int = 1) -> Reweighting:
    """Robust merits at each row's requested location; best means lowest."""
    if tuple(dataset.columns) != tuple(forest.columns):
        raise InvalidInputError("dataset columns do not match the forest")
    est = estimate(forest, dataset.X, noise, threads)
    e = np.asarray(est.expectation)
    return Reweighting(est, int(np.argmin(e)), int(np.argmax(e)))


def estimate_csv(forest: Forest, queries_csv: str | Path, noise: Sequence[NoiseModel],
                 out_csv: str | Path, threads: int = 1) -> RobustEstimate:
    """Batch estimation: queries CSV in, merits CSV out.

    The output repeats the query columns and appends ``expectation``,
    ``output_std`` and ``expectation_std``.
    """
    X, _ = read_table(queries_csv, forest.columns, None)
    est = estimate(forest, X, noise, threads)
    ds_rows = Dataset(forest.columns, X, np.zeros(len(X))).decode() if len(X) else []
    with Path(out_csv).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([c.name for c in forest.columns] + ["expectation", "output_std", "expectation_std"])
        for i, row in enumerate(ds_rows):
            w.writerow(row + [repr(float(est.expectation[i])), repr(float(est.output_std[i])),
                              repr(float(est.expectation_std[i]))])
    return est
