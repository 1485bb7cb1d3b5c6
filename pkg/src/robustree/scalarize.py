"""Collapse a robust estimate into one merit (lower is better)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .estimator import RobustEstimate

FIELDS = ("expectation", "output_std", "expectation_std")
# within-tier scores stay below this so tiers never overlap
_TIER_SPAN = 0.5


@dataclass(frozen=True)
class Objective:
    field: str = "expectation"
    direction: str = "min"
    threshold: float | None = None

    def __post_init__(self):
        if self.field not in FIELDS:
            raise InvalidInputError(f"unknown objective field {self.field!r}")
        if self.direction not in ("min", "max"):
            raise InvalidInputError("direction must be 'min' or 'max'")

    def oriented(self, v: np.ndarray) -> np.ndarray:
        return v if self.direction == "min" else -v

    def satisfied(self, v: np.ndarray) -> np.ndarray:
        if self.threshold is None:
            return np.zeros(np.shape(v), dtype=bool)
        return v <= self.threshold if self.direction == "min" else v >= self.threshold


@dataclass(frozen=True)
class Scalarizer:
    kind: str = "weighted_sum"
    weights: tuple = (1.0, 0.0)
    objectives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "weighted_sum":
            w = tuple(float(v) for v in self.weights)
            if len(w) != 2 or not all(math.isfinite(v) for v in w):
                raise InvalidInputError("weighted_sum needs two finite weights")
            object.__setattr__(self, "weights", w)
        elif self.kind == "threshold_hierarchy":
            objs = tuple(o if isinstance(o, Objective) else Objective(**o) for o in self.objectives)
            if not objs:
                raise InvalidInputError("threshold_hierarchy needs at least one objective")
            object.__setattr__(self, "objectives", objs)
        else:
            raise InvalidInputError(f"unknown scalarizer kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "weighted_sum":
            return {"kind": self.kind, "weights": list(self.weights)}
        return {"kind": self.kind, "objectives": [
            {"field": o.field, "direction": o.direction, "threshold": o.threshold}
            for o in self.objectives]}

    @classmethod
    def from_dict(cls, d: dict) -> "Scalarizer":
        d = dict(d)
        kind = d.pop("kind", "weighted_sum")
        if kind == "weighted_sum":
            return cls(kind, tuple(d.get("weights", (1.0, 0.0))))
        return cls(kind, objectives=tuple(Objective(**o) for o in d.get("objectives", ())))


def weighted_sum(w_expectation: float, w_std: float) -> Scalarizer:
    return Scalarizer("weighted_sum", (w_expectation, w_std))


def threshold_hierarchy(*objectives: Objective) -> Scalarizer:
    return Scalarizer("threshold_hierarchy", objectives=tuple(objectives))


def _hierarchy(objs: tuple, est: RobustEstimate) -> np.ndarray:
    values = [np.atleast_1d(np.asarray(getattr(est, o.field), dtype=float)) for o in objs]
    n = len(values[0])
    # tier = how many leading thresholds are met
    tier = np.zeros(n, dtype=int)
    alive = np.ones(n, dtype=bool)
    for o, v in zip(objs, values):
        alive &= o.satisfied(v)
        tier += alive
    merit = (len(objs) - tier).astype(float)
    for t in np.unique(tier):
        if t >= len(objs):
            continue
        sel = tier == t
        # rank inside a tier by the first objective not yet settled
        v = objs[t].oriented(values[t][sel])
        span = v.max() - v.min()
        merit[sel] += _TIER_SPAN * ((v - v.min()) / span if span > 0 else 0.0)
    return merit


def scalarize(s: Scalarizer, est: RobustEstimate):
    """Merit of one estimate, or of each estimate in a batch.

    ``threshold_hierarchy`` sorts points into tiers by how many leading
    thresholds they meet; any point in a better tier beats every point in a
    worse one.  Inside a tier the first unmet objective decides, min-max
    scaled over the batch.
    """
    single = np.ndim(est.expectation) == 0
    if s.kind == "weighted_sum":
        out = s.weights[0] * np.asarray(est.expectation) + s.weights[1] * np.asarray(est.output_std)
    else:
        out = _hierarchy(s.objectives, est)
    return float(np.asarray(out).reshape(-1)[0]) if single else np.asarray(out, dtype=float)
