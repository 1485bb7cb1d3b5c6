"""Analytic benchmark objectives, their noise settings, and ground truths.

Eight robust benchmarks (``S1``..``S8``) pair a raw objective with
per-dimension input noise.  The true robust objective of each is tabulated on
a dense grid and used as the reference when scoring optimization campaigns.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import estimator
from .dataset import Column, Dataset
from .errors import InvalidInputError
from .noise import (BoundedGamma, Delta, DiscreteLaplace, NoiseModel, Normal,
                    ShiftedPoisson, TruncatedNormal, Uniform)
from .trees import TreeParams, fit

BERTSIMAS_CAP = 80.0
DISCRETE_LEVELS = 22

BERTSIMAS_BOUNDS = ((-1.0, 3.2), (-0.5, 4.4))
CLIFF_BOUNDS = (0.0, 5.0)
SINE_BOUNDS = (-1.0, 1.0)


def bertsimas(X) -> np.ndarray:
    """Nonconvex polynomial of x, y, capped at 80."""
    X = np.atleast_2d(X)
    x, y = X[:, 0], X[:, 1]
    f = (2 * x**6 - 12.2 * x**5 + 21.2 * x**4 + 6.2 * x - 6.4 * x**3 - 4.7 * x**2
         + y**6 - 11 * y**5 + 43.3 * y**4 - 10 * y - 74.8 * y**3 + 56.9 * y**2
         - 4.1 * x * y - 0.1 * y**2 * x**2 + 0.4 * y**2 * x + 0.4 * x**2 * y)
    return np.minimum(f, BERTSIMAS_CAP)


def cliff(X) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.sum(10.0 / (1.0 + 0.3 * np.exp(6.0 * X)) + 0.2 * X**2, axis=1)


def sine(X) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.sum(np.sin(2 * np.pi * X**2) + X**2 + 0.2 * X, axis=1)


@dataclass(frozen=True)
class Surface:
    """A deterministic objective over a box (continuous) or an integer grid.

    Discrete surfaces map level ``i`` in ``1..22`` linearly onto the box of
    their continuous parent, so level 1 is the lower edge and level 22 the
    upper edge.
    """

    name: str
    bounds: tuple
    function: Callable = field(repr=False, compare=False)
    minimizer: tuple = ()
    discrete: bool = False
    parent_bounds: tuple = ()

    @property
    def dims(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=float)

    @property
    def columns(self) -> tuple[Column, ...]:
        kind = "discrete" if self.discrete else "continuous"
        return tuple(Column(f"x{i}", kind) for i in range(self.dims))

    def evaluate(self, X, extrapolate: bool = False) -> np.ndarray:
        """Objective values; ``extrapolate`` lifts the domain check on
        discrete surfaces (integer levels outside 1..22)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dims:
            raise InvalidInputError(f"{self.name} expects {self.dims} coordinates")
        if self.discrete:
            if np.any(X != np.round(X)):
                raise InvalidInputError(f"{self.name} accepts integer levels only")
            if not extrapolate and (np.any(X < self.lower) or np.any(X > self.upper)):
                raise InvalidInputError(f"{self.name} levels must lie in 1..{DISCRETE_LEVELS}")
            X = self._parent_coordinates(X)
        return self.function(X)

    def __call__(self, X) -> np.ndarray:
        return self.evaluate(X)

    def _parent_coordinates(self, levels: np.ndarray) -> np.ndarray:
        lo = np.array([b[0] for b in self.parent_bounds])
        hi = np.array([b[1] for b in self.parent_bounds])
        return lo + (levels - 1.0) * (hi - lo) / (DISCRETE_LEVELS - 1)


def get_surface(name: str, dims: int = 2) -> Surface:
    if name == "bertsimas":
        if dims != 2:
            raise InvalidInputError("bertsimas is two-dimensional")
        return Surface("bertsimas", BERTSIMAS_BOUNDS, bertsimas, (2.8, 4.0))
    if name == "cliff":
        return Surface("cliff", (CLIFF_BOUNDS,) * dims, cliff, (1.02874,) * dims)
    if name == "sine":
        return Surface("sine", (SINE_BOUNDS,) * dims, sine, (-0.85297,) * dims)
    levels = ((1.0, float(DISCRETE_LEVELS)),) * 2
    if name == "discrete_bertsimas":
        return Surface(name, levels, bertsimas, (20, 20), True, BERTSIMAS_BOUNDS)
    if name == "discrete_cliff":
        return Surface(name, levels, cliff, (5, 5), True, (CLIFF_BOUNDS,) * 2)
    raise InvalidInputError(f"unknown surface {name!r}")


def eval_surface(surface: Surface, x):
    """Objective value at one point (scalar) or at each row of a batch."""
    out = surface.evaluate(x)
    return float(out[0]) if np.ndim(x) == 1 else out


# -- benchmark specs -------------------------------------------------------------

_TABLE = {
    "S1": ("cliff", lambda: Normal(1.0)),
    "S2": ("cliff", lambda: BoundedGamma(2.0, high=5.0)),
    "S3": ("bertsimas", lambda: Uniform(1.5)),
    "S4": ("bertsimas", lambda: Normal(0.8)),
    "S5": ("sine", lambda: Uniform(0.5)),
    "S6": ("sine", lambda: Normal(0.2)),
    "S7": ("discrete_cliff", lambda: DiscreteLaplace(scale=3.0)),
    "S8": ("discrete_bertsimas", lambda: ShiftedPoisson(1)),
}
LABELS = tuple(_TABLE)
IMPROVEMENT = {"S1": 25, "S2": 51, "S3": 34, "S4": 53, "S5": 26, "S6": 26, "S7": 18, "S8": 74}


@dataclass(frozen=True)
class BenchmarkSpec:
    label: str
    surface: Surface
    noise: tuple

    @property
    def dims(self) -> int:
        return self.surface.dims

    @property
    def budget(self) -> int:
        return 64 if self.surface.discrete else 196

    @property
    def grid_shape(self) -> tuple:
        n = 8 if self.surface.discrete else 14
        return (n,) * self.dims

    @property
    def noisy_dims(self) -> list[int]:
        return [d for d, m in enumerate(self.noise) if not isinstance(m, Delta)]


def benchmark_spec(label: str, extra_dims: int = 0) -> BenchmarkSpec:
    """Benchmark setting ``S1``..``S8``; ``extra_dims`` appends noiseless Cliff dimensions
    (``S1`` only)."""
    if label not in _TABLE:
        raise InvalidInputError(f"unknown benchmark label {label!r}")
    name, make_noise = _TABLE[label]
    if extra_dims:
        if label != "S1":
            raise InvalidInputError("extra dimensions are defined for S1 only")
        surface = get_surface("cliff", 2 + extra_dims)
        return BenchmarkSpec(label, surface, (make_noise(), make_noise()) + (Delta(),) * extra_dims)
    surface = get_surface(name)
    return BenchmarkSpec(label, surface, tuple(make_noise() for _ in range(surface.dims)))


def delta_spec(spec: BenchmarkSpec) -> BenchmarkSpec:
    """Same surface without input noise."""
    return BenchmarkSpec(spec.label, spec.surface, tuple(Delta() for _ in spec.noise))


def noise_reach(model: NoiseModel, n_std: float = 2.0) -> tuple[float, float]:
    """How far below/above the query the realized inputs are sampled when
    building a ground truth: the support edge for bounded noise, ``n_std``
    standard deviations otherwise."""
    if isinstance(model, Delta):
        return 0.0, 0.0
    if isinstance(model, Uniform):
        return 0.5 * model.width, 0.5 * model.width
    if isinstance(model, (Normal, TruncatedNormal, BoundedGamma)):
        r = n_std * model.std
        return r, r
    raise InvalidInputError(f"no reach rule for {model.kind}")


# -- ground truth ----------------------------------------------------------------

@dataclass
class GroundTruth:
    """True robust merits tabulated on an in-domain grid."""

    label: str
    axes: list
    values: np.ndarray
    density: int
    margins: list
    seed: int = 0
    raw_min: tuple = ()
    raw_min_value: float = math.nan
    extra_dims: int = 0

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    @property
    def flat_values(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def robust_min_index(self) -> int:
        return int(np.argmin(self.values))

    @property
    def robust_min(self) -> np.ndarray:
        return self.points[self.robust_min_index]

    @property
    def robust_min_value(self) -> float:
        return float(self.values.min())

    @property
    def value_range(self) -> float:
        return float(self.values.max() - self.values.min())

    @property
    def improvement(self) -> float:
        """Robust-merit gain from moving the raw minimum to the robust
        minimum, as a fraction of the robust objective's range."""
        return (self.raw_min_value - self.robust_min_value) / self.value_range

    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    def lookup(self, X) -> np.ndarray:
        """Nearest-grid-point merit for each row of ``X``.

        Columns beyond the tabulated ones are noiseless Cliff dimensions,
        whose contribution is added exactly.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        D = len(self.axes)
        idx = []
        for d, ax in enumerate(self.axes):
            j = np.searchsorted(ax, X[:, d])
            j = np.clip(j, 1, len(ax) - 1)
            left = ax[j - 1]
            j = np.where(np.abs(X[:, d] - left) <= np.abs(ax[j] - X[:, d]), j - 1, j)
            idx.append(j)
        out = self.values[tuple(idx)]
        if X.shape[1] > D:
            out = out + cliff(X[:, D:])
        return out

    # -- cache ------------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{d}" for d in range(len(self.axes))] + ["robust_merit"])
            for p, v in zip(self.points, self.flat_values):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])
        meta = {"label": self.label, "density": self.density, "seed": self.seed,
                "margins": [list(m) for m in self.margins], "raw_min": list(self.raw_min),
                "raw_min_value": self.raw_min_value, "extra_dims": self.extra_dims}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = json.loads(path.with_suffix(".json").read_text())
        D = data.shape[1] - 1
        axes = [np.unique(data[:, d]) for d in range(D)]
        values = data[:, -1].reshape(tuple(len(a) for a in axes))
        return cls(meta["label"], axes, values, meta["density"],
                   [tuple(m) for m in meta["margins"]], meta["seed"],
                   tuple(meta["raw_min"]), meta["raw_min_value"], meta.get("extra_dims", 0))


def _continuous_truth(spec: BenchmarkSpec, density: int, seed: int, n_std: float):
    surface = spec.surface
    lo, hi = surface.lower, surface.upper
    margins = [noise_reach(m, n_std) for m in spec.noise]
    for d, m in enumerate(spec.noise):
        # no samples beyond a hard support bound
        if isinstance(m, BoundedGamma) and m.high is not None:
            margins[d] = (margins[d][0], max(0.0, min(margins[d][1], m.high - hi[d])))
        if isinstance(m, BoundedGamma) and m.low is not None:
            margins[d] = (max(0.0, min(margins[d][0], lo[d] - m.low)), margins[d][1])
        if isinstance(m, TruncatedNormal):
            margins[d] = (max(0.0, min(margins[d][0], lo[d] - m.low)),
                          max(0.0, min(margins[d][1], m.high - hi[d])))
    fit_axes = [np.linspace(lo[d] - margins[d][0], hi[d] + margins[d][1], density)
                for d in range(surface.dims)]
    mesh = np.meshgrid(*fit_axes, indexing="ij")
    Xfit = np.column_stack([m.ravel() for m in mesh])
    forest = fit(Dataset(surface.columns, Xfit, surface.evaluate(Xfit)), TreeParams(rng_seed=seed))
    axes = [np.linspace(lo[d], hi[d], density) for d in range(surface.dims)]
    mesh = np.meshgrid(*axes, indexing="ij")
    Q = np.column_stack([m.ravel() for m in mesh])
    values = estimator.expectation(forest, np.vstack([Q, np.asarray(surface.minimizer)[None, :]]),
                                   spec.noise)
    return axes, values[:-1].reshape(tuple(len(a) for a in axes)), margins, float(values[-1])


def pmf_matrix(model: NoiseModel, queries: np.ndarray, support: np.ndarray) -> np.ndarray:
    """``P(X = k | q)`` for integer ``k`` in ``support``, shape ``(Q, K)``."""
    q = queries[:, None]
    k = support[None, :]
    return model.cdf(k, q) - model.cdf(k - 1, q)


def _discrete_truth(spec: BenchmarkSpec, tail: float = 1e-14):
    """Exact enumeration over the noise-extended integer lattice."""
    surface = spec.surface
    levels = np.arange(1, DISCRETE_LEVELS + 1, dtype=float)
    tables, supports, margins = [], [], []
    for m in spec.noise:
        ext = 0
        while True:
            support = np.arange(1 - ext, DISCRETE_LEVELS + ext + 1, dtype=float)
            P = pmf_matrix(m, levels, support)
            if P.sum(axis=1).min() >= 1.0 - tail or ext > 10_000:
                break
            ext = max(1, 2 * ext)
        tables.append(P)
        supports.append(support)
        margins.append((float(ext), float(ext)))
    mesh = np.meshgrid(*supports, indexing="ij")
    F = surface.evaluate(np.column_stack([g.ravel() for g in mesh]), extrapolate=True)
    G = F.reshape(tuple(len(s) for s in supports))
    for P in tables:
        # contract the leading support axis; the level axis moves to the back
        G = np.tensordot(G, P, axes=([0], [1]))
    raw = tuple(int(v) - 1 for v in surface.minimizer)
    return [levels.copy() for _ in supports], G, margins, float(G[raw])


def ground_truth(spec: BenchmarkSpec, density: int = 200, seed: int = 0,
                 cache_dir: str | Path | None = None, n_std: float = 2.0) -> GroundTruth:
    """Tabulate the true robust objective of ``spec``.

    Continuous specs fit one fully grown regression tree to a
    ``density``-per-dimension grid that overshoots the domain by the noise
    reach and evaluate its expectation on an in-domain grid of the same
    density.  Discrete specs are enumerated exactly.  With ``cache_dir`` the
    table is read from / written to ``<label>_d<density>_s<seed>.csv``.
    """
    extra = 0
    base = spec
    if spec.surface.name == "cliff" and spec.dims > 2:
        extra = spec.dims - 2
        base = BenchmarkSpec(spec.label, get_surface("cliff", 2), spec.noise[:2])
    if any(not isinstance(m, Delta) for m in spec.noise[2:]) and extra:
        raise InvalidInputError("extra dimensions must be noiseless")
    path = None
    if cache_dir is not None:
        tag = "delta" if not base.noisy_dims else base.label
        cache = Path(cache_dir)
        cache.mkdir(parents=True, exist_ok=True)
        density_tag = DISCRETE_LEVELS if base.surface.discrete else density
        path = cache / f"{tag}_d{density_tag}_s{seed}.csv"
        if path.exists():
            gt = GroundTruth.load(path)
            gt.extra_dims = extra
            return gt
    if base.surface.discrete:
        axes, values, margins, raw_value = _discrete_truth(base)
        density = DISCRETE_LEVELS
    else:
        if density < 2:
            raise InvalidInputError("grid density must be at least 2")
        axes, values, margins, raw_value = _continuous_truth(base, density, seed, n_std)
    gt = GroundTruth(spec.label, axes, values, density, margins, seed,
                     tuple(float(v) for v in base.surface.minimizer), raw_value, extra)
    if path is not None:
        gt.save(path)
    return gt


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Rank correlation with average ranks for ties."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError("spearman needs two 1-D sequences of equal length")
    if len(a) < 2:
        raise InvalidInputError("spearman needs at least two values")
    ra = stats.rankdata(a) - (len(a) + 1) / 2.0
    rb = stats.rankdata(b) - (len(b) + 1) / 2.0
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        return math.nan
    return float(ra @ rb) / denom


def grid_points(surface: Surface, per_dim: int) -> np.ndarray:
    """Uniform lattice over the domain (rounded to levels on discrete surfaces)."""
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in surface.bounds]
    if surface.discrete:
        axes = [np.round(a) for a in axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass(frozen=True)
class SurrogateCheck:
    """How well a sparse-sample robust surrogate tracks the ground truth."""

    label: str
    rho: float
    best_sample: np.ndarray
    distance_in_cells: float


def surrogate_check(spec: BenchmarkSpec, truth: GroundTruth, per_dim: int = 8,
                    params: TreeParams | None = None) -> SurrogateCheck:
    """Fit on a ``per_dim`` lattice, score the robust surrogate on the truth
    grid (Spearman) and locate the best sample relative to the true robust
    minimum, in units of the lattice spacing (Chebyshev distance)."""
    X = grid_points(spec.surface, per_dim)
    ds = Dataset(spec.surface.columns, X, spec.surface.evaluate(X))
    forest = fit(ds, params or TreeParams())
    g_hat = estimator.expectation(forest, truth.points, spec.noise)
    rho = spearman(g_hat, truth.flat_values)
    merits = estimator.expectation(forest, X, spec.noise)
    best = X[int(np.argmin(merits))]
    cell = (spec.surface.upper - spec.surface.lower) / (per_dim - 1)
    dist = float(np.max(np.abs(best - truth.robust_min) / cell))
    return SurrogateCheck(spec.label, rho, best, dist)
