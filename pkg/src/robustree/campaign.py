"""Sequential optimization campaigns on the benchmark surfaces.

A campaign asks a planner for a point, evaluates the surface there (at a
noisy realization of it in ``noisy`` mode), and, with robust estimation
switched on, refits the tree surrogate on everything collected so far and
re-scores every point by its estimated robust merit.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.stats import qmc

from . import estimator
from .dataset import Dataset
from .errors import InvalidInputError
from .scalarize import Scalarizer, scalarize
from .surfaces import BenchmarkSpec, GroundTruth, Surface, benchmark_spec
from .trees import TreeParams, fit

PLANNER_KINDS = ("grid", "random", "sobol", "random_edge", "sobol_edge", "genetic")
MODES = ("noiseless", "noisy")


@dataclass(frozen=True)
class PlannerConfig:
    """Planner settings.

    ``grid_shape`` defaults to 14 points per dimension on continuous surfaces
    and 8 on discrete ones; the edge planners use the boundary of that
    lattice.  Genetic settings: ``population`` random points seed the search,
    afterwards parents are the best ``elite_fraction`` of that many points by
    current merit, picked by size-``tournament`` tournaments and mutated with
    Gaussian steps of ``mutation_sigma`` times the domain width.
    """

    kind: str = "grid"
    budget: int | None = None
    seed: int = 0
    grid_shape: tuple | None = None
    population: int = 20
    mutation_sigma: float = 0.1
    elite_fraction: float = 0.5
    tournament: int = 2

    def __post_init__(self):
        if self.kind not in PLANNER_KINDS:
            raise InvalidInputError(f"unknown planner kind {self.kind!r}")
        if self.budget is not None and self.budget <= 0:
            raise InvalidInputError("budget must be positive")
        if self.grid_shape is not None:
            object.__setattr__(self, "grid_shape", tuple(int(n) for n in self.grid_shape))
        if self.population < 2 or not 0 < self.elite_fraction <= 1 or self.mutation_sigma <= 0:
            raise InvalidInputError("invalid genetic planner settings")

    @property
    def consumes_merits(self) -> bool:
        return self.kind == "genetic"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid_shape"] = list(self.grid_shape) if self.grid_shape else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        return cls(**d)


class Planner(Protocol):
    def propose(self) -> np.ndarray: ...

    def observe(self, X: np.ndarray, merits: np.ndarray) -> None: ...


def lattice(surface: Surface, shape: Sequence[int]) -> np.ndarray:
    if len(shape) != surface.dims:
        raise InvalidInputError(f"grid shape {tuple(shape)} does not match {surface.dims} dimensions")
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(surface.bounds, shape)]
    if surface.discrete:
        axes = [np.round(a) for a in axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def boundary_points(surface: Surface, shape: Sequence[int]) -> np.ndarray:
    """Lattice points with at least one coordinate on the domain edge."""
    P = lattice(surface, shape)
    edge = np.any((P == surface.lower) | (P == surface.upper), axis=1)
    return P[edge]


def _uniform(surface: Surface, rng: np.random.Generator, n: int) -> np.ndarray:
    if surface.discrete:
        return rng.integers(surface.lower.astype(int), surface.upper.astype(int) + 1,
                            size=(n, surface.dims)).astype(float)
    return rng.uniform(surface.lower, surface.upper, size=(n, surface.dims))


def _sobol(surface: Surface, rng: np.random.Generator, n: int) -> np.ndarray:
    eng = qmc.Sobol(surface.dims, scramble=True, seed=rng)
    with warnings.catch_warnings():
        # budgets need not be powers of two
        warnings.simplefilter("ignore", UserWarning)
        u = eng.random(n)
    if surface.discrete:
        lo, hi = surface.lower, surface.upper
        return np.minimum(np.floor(lo + u * (hi - lo + 1)), hi)
    return qmc.scale(u, surface.lower, surface.upper)


class SequencePlanner:
    """Proposes a precomputed list of points."""

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=float)
        self._k = 0

    def propose(self) -> np.ndarray:
        if self._k >= len(self.points):
            raise InvalidInputError("planner budget exhausted")
        x = self.points[self._k]
        self._k += 1
        return x.copy()

    def observe(self, X, merits) -> None:
        pass


class GeneticPlanner:
    """(mu + lambda) evolution driven by whatever merits it is told."""

    def __init__(self, surface: Surface, config: PlannerConfig, rng: np.random.Generator):
        self.surface = surface
        self.config = config
        self.rng = rng
        self.X = np.empty((0, surface.dims))
        self.merits = np.empty(0)
        self.seen_merits: list[np.ndarray] = []

    def propose(self) -> np.ndarray:
        cfg, s = self.config, self.surface
        if len(self.X) < cfg.population:
            return _uniform(s, self.rng, 1)[0]
        n_parents = max(2, math.ceil(cfg.elite_fraction * cfg.population))
        parents = np.argsort(self.merits, kind="stable")[:n_parents]
        picks = self.rng.choice(parents, size=cfg.tournament, replace=True)
        parent = self.X[picks[np.argmin(self.merits[picks])]]
        step = cfg.mutation_sigma * (s.upper - s.lower) * self.rng.standard_normal(s.dims)
        child = np.clip(parent + step, s.lower, s.upper)
        if s.discrete:
            child = np.clip(np.round(child), s.lower, s.upper)
        return child

    def observe(self, X, merits) -> None:
        self.X = np.asarray(X, dtype=float)
        self.merits = np.asarray(merits, dtype=float)
        self.seen_merits.append(self.merits.copy())


def make_planner(config: PlannerConfig, spec: BenchmarkSpec, rng: np.random.Generator):
    surface = spec.surface
    budget = config.budget or spec.budget
    shape = config.grid_shape or spec.grid_shape
    if config.kind == "grid":
        P = lattice(surface, shape)
        if budget > len(P):
            raise InvalidInputError(f"budget {budget} exceeds the {len(P)}-point grid")
        return SequencePlanner(P[rng.permutation(len(P))[:budget]])
    if config.kind == "random":
        return SequencePlanner(_uniform(surface, rng, budget))
    if config.kind == "sobol":
        return SequencePlanner(_sobol(surface, rng, budget))
    if config.kind in ("random_edge", "sobol_edge"):
        edge = boundary_points(surface, shape)
        if len(edge) > budget:
            raise InvalidInputError(f"budget {budget} is smaller than the {len(edge)} boundary points")
        draw = _uniform if config.kind == "random_edge" else _sobol
        P = np.vstack([edge, draw(surface, rng, budget - len(edge))])
        return SequencePlanner(P[rng.permutation(len(P))])
    return GeneticPlanner(surface, config, rng)


@dataclass
class CampaignRecord:
    """One campaign, iteration by iteration.

    ``merits[k]`` is the robust merit of point ``k`` as estimated right after
    it was observed (NaN without robust estimation); ``incumbents[k]`` is the
    index of the best point after iteration ``k`` by the merit that steered
    the campaign.
    """

    requested: np.ndarray
    realized: np.ndarray
    observed: np.ndarray
    merits: np.ndarray
    incumbents: np.ndarray
    merit_incumbents: np.ndarray | None
    config: dict
    seed: int

    def __len__(self) -> int:
        return len(self.observed)

    @property
    def raw_incumbents(self) -> np.ndarray:
        # first occurrence wins ties
        best = np.minimum.accumulate(self.observed)
        return np.array([int(np.flatnonzero(self.observed[:k + 1] == best[k])[0])
                         for k in range(len(self))], dtype=int)

    def save(self, csv_path: str | Path, summary: dict | None = None) -> None:
        csv_path = Path(csv_path)
        D = self.requested.shape[1]
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"requested_x{d}" for d in range(D)]
                       + [f"realized_x{d}" for d in range(D)] + ["observed", "merit", "incumbent"])
            for k in range(len(self)):
                w.writerow([k] + [repr(float(v)) for v in self.requested[k]]
                           + [repr(float(v)) for v in self.realized[k]]
                           + [repr(float(self.observed[k])), repr(float(self.merits[k])),
                              int(self.incumbents[k])])
        doc = {"seed": self.seed, "config": self.config,
               "final_incumbent": self.requested[self.incumbents[-1]].tolist()}
        doc.update(summary or {})
        csv_path.with_suffix(".json").write_text(json.dumps(doc, indent=2))

    @classmethod
    def load(cls, csv_path: str | Path) -> "CampaignRecord":
        csv_path = Path(csv_path)
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        doc = json.loads(csv_path.with_suffix(".json").read_text())
        D = (data.shape[1] - 4) // 2
        robust = doc["config"].get("robust", False)
        inc = data[:, -1].astype(int)
        return cls(data[:, 1:1 + D], data[:, 1 + D:1 + 2 * D], data[:, 1 + 2 * D],
                   data[:, 2 + 2 * D], inc, inc if robust else None, doc["config"], doc["seed"])


def _merits(forest, X, noise, scalarizer: Scalarizer | None) -> np.ndarray:
    if scalarizer is None:
        return np.asarray(estimator.expectation(forest, X, noise))
    return np.asarray(scalarize(scalarizer, estimator.estimate(forest, X, noise)))


def robust_merits(spec: BenchmarkSpec, X, y, tree_params: TreeParams | None = None,
                  scalarizer: Scalarizer | None = None) -> np.ndarray:
    """Refit the surrogate on ``(X, y)`` and return every point's merit."""
    ds = Dataset(spec.surface.columns, X, y)
    forest = fit(ds, tree_params or TreeParams())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", estimator.ExtrapolationWarning)
        return _merits(forest, ds.X, spec.noise, scalarizer)


def run(spec: BenchmarkSpec, planner: PlannerConfig | Planner, mode: str = "noiseless",
        robust: bool = True, tree_params: TreeParams | None = None, seed: int = 0,
        budget: int | None = None, scalarizer: Scalarizer | None = None) -> CampaignRecord:
    """Run one campaign.

    The surrogate is always trained on requested locations; in noisy mode
    the observation comes from a realization drawn from the benchmark noise.
    ``planner`` may be a config or any object with ``propose``/``observe``.
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}")
    tree_params = tree_params or TreeParams()
    plan_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    if isinstance(planner, PlannerConfig):
        budget = budget or planner.budget or spec.budget
        planner_cfg = planner.to_dict()
        planner = make_planner(planner, spec, np.random.default_rng(plan_ss))
        consumes = planner_cfg["kind"] == "genetic"
    else:
        budget = budget or spec.budget
        planner_cfg = {"kind": type(planner).__name__}
        consumes = True
    noise_rng = np.random.default_rng(noise_ss)
    D = spec.dims
    req = np.empty((budget, D))
    real = np.empty((budget, D))
    obs = np.empty(budget)
    merits = np.full(budget, np.nan)
    merit_inc = np.empty(budget, dtype=int)
    for k in range(budget):
        x = np.asarray(planner.propose(), dtype=float)
        if x.shape != (D,):
            raise InvalidInputError(f"planner proposed a point of shape {x.shape}")
        if np.any(x < spec.surface.lower) or np.any(x > spec.surface.upper):
            raise InvalidInputError("planner proposed a point outside the domain")
        xr = x.copy()
        if mode == "noisy":
            for d, m in enumerate(spec.noise):
                xr[d] = m.sample(x[d], noise_rng)
        req[k], real[k] = x, xr
        obs[k] = spec.surface.evaluate(xr, extrapolate=True)[0]
        if robust:
            g = robust_merits(spec, req[:k + 1], obs[:k + 1], tree_params, scalarizer)
            merits[k] = g[k]
            merit_inc[k] = int(np.argmin(g))
            planner.observe(req[:k + 1], g if consumes else obs[:k + 1])
        else:
            planner.observe(req[:k + 1], obs[:k + 1])
    config = {"label": spec.label, "dims": D, "planner": planner_cfg, "mode": mode,
              "robust": bool(robust), "trees": tree_params.to_dict(), "budget": budget,
              "scalarizer": scalarizer.to_dict() if scalarizer else None}
    rec = CampaignRecord(req, real, obs, merits, merit_inc, merit_inc if robust else None,
                         config, seed)
    if not robust:
        rec.incumbents = rec.raw_incumbents
    return rec


def robust_incumbents(record: CampaignRecord, spec: BenchmarkSpec,
                      tree_params: TreeParams | None = None, every: int = 1) -> np.ndarray:
    """Best point by refitted robust merit after each iteration.

    With ``every > 1`` the refit happens only at iterations ``every-1,
    2*every-1, ...`` (and the last one); the incumbent is held in between.
    """
    if len(record) == 0:
        raise InvalidInputError("empty campaign record")
    if every == 1 and record.merit_incumbents is not None:
        return record.merit_incumbents
    K = len(record)
    inc = np.empty(K, dtype=int)
    current = 0
    for k in range(K):
        if (k + 1) % every == 0 or k == K - 1 or k == 0:
            g = robust_merits(spec, record.requested[:k + 1], record.observed[:k + 1], tree_params)
            current = int(np.argmin(g))
        inc[k] = current
    return inc


def cumulative_regret(record: CampaignRecord, truth: GroundTruth, robust: bool,
                      spec: BenchmarkSpec | None = None, tree_params: TreeParams | None = None,
                      every: int = 1) -> float:
    """Sum over iterations of the true robust merit at the incumbent.

    The incumbent is chosen by estimated robust merit when ``robust`` and
    by the raw observations otherwise.
    """
    if len(record) == 0:
        raise InvalidInputError("empty campaign record")
    if robust:
        if spec is None:
            spec = benchmark_spec(record.config["label"], record.config.get("dims", 2) - 2)
        if tree_params is None and "trees" in record.config:
            tree_params = TreeParams.from_dict(record.config["trees"])
        inc = robust_incumbents(record, spec, tree_params, every)
    else:
        inc = record.raw_incumbents
    g = truth.lookup(record.requested)
    return float(np.sum(g[inc]))


def normalize_regrets(values) -> np.ndarray:
    """Min-max scale one group to [0, 1]; a constant group maps to zeros."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


@dataclass(frozen=True)
class Comparison:
    probability: float
    significant: bool
    alpha: float = 0.05

    @property
    def better(self) -> bool:
        return self.significant and self.probability > 0.5

    @property
    def worse(self) -> bool:
        return self.significant and self.probability < 0.5


def improvement_probability(with_robust, without_robust, n_boot: int = 10_000,
                            seed: int = 0, alpha: float = 0.05) -> Comparison:
    """Bootstrap probability that robust estimation lowers the mean regret.

    Both sets are resampled independently; ties count half.  Significance is
    two-sided at ``alpha``.
    """
    a = np.asarray(with_robust, dtype=float)
    b = np.asarray(without_robust, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InvalidInputError("need at least two repeats per arm")
    if len(a) != len(b):
        raise InvalidInputError("repeat sets must have equal length")
    rng = np.random.default_rng(seed)
    ma = a[rng.integers(0, len(a), size=(n_boot, len(a)))].mean(axis=1)
    mb = b[rng.integers(0, len(b), size=(n_boot, len(b)))].mean(axis=1)
    p = float(np.mean(ma < mb) + 0.5 * np.mean(ma == mb))
    return Comparison(p, p >= 1 - alpha / 2 or p <= alpha / 2, alpha)


# -- benchmark matrix ------------------------------------------------------------

@dataclass
class BenchmarkResult:
    label: str
    planner: str
    mode: str
    regret_on: np.ndarray
    regret_off: np.ndarray
    seeds: list = field(default_factory=list)

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        both = normalize_regrets(np.concatenate([self.regret_on, self.regret_off]))
        return both[:len(self.regret_on)], both[len(self.regret_on):]

    def comparison(self, n_boot: int = 10_000, seed: int = 0) -> Comparison | None:
        if len(self.regret_on) < 2:
            return None
        on, off = self.normalized()
        return improvement_probability(on, off, n_boot, seed)

    def summary(self, n_boot: int = 10_000) -> dict:
        d = {"label": self.label, "planner": self.planner, "mode": self.mode,
             "repeats": len(self.regret_on)}
        cmp = self.comparison(n_boot)
        if cmp is None:
            d.update(regret_on=self.regret_on.tolist(), regret_off=self.regret_off.tolist())
            return d
        on, off = self.normalized()
        d.update(mean_normalized_on=float(on.mean()), mean_normalized_off=float(off.mean()),
                 median_normalized_on=float(np.median(on)),
                 median_normalized_off=float(np.median(off)),
                 improvement_probability=cmp.probability, significant=cmp.significant)
        return d


def repeat_seed(seed: int, label: str, planner: str, mode: str, r: int) -> int:
    """Seed of repeat ``r``; disjoint across matrix cells."""
    key = [seed, sum(map(ord, label)), PLANNER_KINDS.index(planner), MODES.index(mode), r]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def benchmark(spec: BenchmarkSpec, truth: GroundTruth, planner: PlannerConfig, mode: str,
              repeats: int, tree_params: TreeParams | None = None, seed: int = 0,
              budget: int | None = None, every: int = 1) -> BenchmarkResult:
    """Regret with and without robust estimation over ``repeats`` campaigns.

    Planners that ignore merits propose the same points either way, so each
    repeat runs once and both incumbent rules are scored on that record.
    """
    on, off, seeds = [], [], []
    for r in range(repeats):
        s = repeat_seed(seed, spec.label, planner.kind, mode, r)
        seeds.append(s)
        if planner.consumes_merits:
            rec_robust = run(spec, planner, mode, True, tree_params, s, budget)
            rec_off = run(spec, planner, mode, False, tree_params, s, budget)
        else:
            rec_robust = rec_off = run(spec, planner, mode, every == 1, tree_params, s, budget)
        on.append(cumulative_regret(rec_robust, truth, True, spec, tree_params, every))
        off.append(cumulative_regret(rec_off, truth, False))
    return BenchmarkResult(spec.label, planner.kind, mode, np.array(on), np.array(off), seeds)
