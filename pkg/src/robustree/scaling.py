"""Wall-time sweeps of the estimator over S, T, M and D.

S is the number of query points, T the number of trees, M the number of
tiles per tree and D the input dimensionality.  Fully grown extremely
randomized trees on M distinct training points have exactly M tiles, so M
is set through the training-set size.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import estimator
from .dataset import Dataset, continuous_columns
from .noise import Normal
from .trees import TreeParams, fit

BASE = {"S": 1000, "T": 4, "M": 1000, "D": 2}
SWEEP = {
    "S": (500, 1000, 2000, 4000),
    "T": (2, 4, 8, 16),
    "M": (500, 1000, 2000, 4000),
    "D": (1, 2, 4, 8),
}
REFERENCE = {"S": 2500, "T": 10, "M": 2500, "D": 2}


@dataclass(frozen=True)
class Timing:
    variable: str
    S: int
    T: int
    M: int
    D: int
    seconds: float

    @property
    def value(self) -> int:
        return getattr(self, self.variable) if self.variable in "STMD" else self.S


def make_problem(T: int, M: int, D: int, S: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(M, D))
    y = np.sin(6 * X).sum(axis=1) + 0.1 * rng.standard_normal(M)
    forest = fit(Dataset(continuous_columns(D), X, y),
                 TreeParams("extra_trees", n_trees=T, rng_seed=seed))
    Q = rng.uniform(0.0, 1.0, size=(S, D))
    return forest, Q, [Normal(0.1)] * D


def time_batch(S: int, T: int, M: int, D: int, repeats: int = 3, seed: int = 0,
               threads: int = 1) -> float:
    """Best-of-``repeats`` seconds for one ``estimate`` call (fit excluded)."""
    forest, Q, noise = make_problem(T, M, D, S, seed)
    best = np.inf
    with warnings.catch_warnings():
        # uniform queries near the corners fall outside the training hull
        warnings.simplefilter("ignore", estimator.ExtrapolationWarning)
        estimator.estimate(forest, Q[:2], noise)  # compile / warm caches
        for _ in range(repeats):
            t0 = time.perf_counter()
            estimator.estimate(forest, Q, noise, threads=threads)
            best = min(best, time.perf_counter() - t0)
    return float(best)


def sweep(variables=("S", "T", "M", "D"), base: dict | None = None, grid: dict | None = None,
          repeats: int = 3, seed: int = 0, threads: int = 1) -> list[Timing]:
    """Vary one variable at a time around ``base``."""
    base = dict(base or BASE)
    grid = grid or SWEEP
    rows = []
    for var in variables:
        for v in grid[var]:
            p = dict(base, **{var: v})
            rows.append(Timing(var, p["S"], p["T"], p["M"], p["D"],
                               time_batch(p["S"], p["T"], p["M"], p["D"], repeats, seed, threads)))
    return rows


def slopes(rows: list[Timing]) -> dict[str, float]:
    """Log-log slope of time against each swept variable."""
    out = {}
    for var in sorted({r.variable for r in rows} & set("STMD")):
        sel = [r for r in rows if r.variable == var]
        x = np.log([getattr(r, var) for r in sel])
        y = np.log([r.seconds for r in sel])
        out[var] = float(np.polyfit(x, y, 1)[0])
    return out


def reference(repeats: int = 1, seed: int = 0, threads: int = 1) -> Timing:
    p = REFERENCE
    return Timing("reference", p["S"], p["T"], p["M"], p["D"],
                  time_batch(p["S"], p["T"], p["M"], p["D"], repeats, seed, threads))


def write_csv(rows: list[Timing], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variable", "S", "T", "M", "D", "seconds"])
        for r in rows:
            w.writerow([r.variable, r.S, r.T, r.M, r.D, f"{r.seconds:.6g}"])


def read_csv(path: str | Path) -> list[Timing]:
    with Path(path).open(newline="") as fh:
        return [Timing(r["variable"], int(r["S"]), int(r["T"]), int(r["M"]), int(r["D"]),
                       float(r["seconds"])) for r in csv.DictReader(fh)]
