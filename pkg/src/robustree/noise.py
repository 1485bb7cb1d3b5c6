"""Input-noise distributions.

Every model describes the law of a realized input value given the value that
was requested (the *query*).  Numeric models expose ``cdf`` and
``interval_probability``; the categorical model exposes
``category_probability``.  All numeric methods broadcast over ``query`` and
the evaluation point ``a`` with ordinary numpy rules, so the estimator can ask
for a full ``(n_queries, n_thresholds)`` table in one call.

Intervals follow the CDF-difference convention ``P(lo < X <= hi)``, which is
also the side on which tree splits send a point equal to the threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, ClassVar, Sequence

import numpy as np
from scipy import special, stats

from .errors import InvalidInputError, UnsupportedOperationError

ScaleFn = Callable[[np.ndarray], Any]


def _as_float(x):
    return np.asarray(x, dtype=float)


class NoiseModel:
    """Base class for a one-dimensional input-uncertainty distribution."""

    kind: ClassVar[str] = ""
    is_discrete: ClassVar[bool] = False
    is_categorical: ClassVar[bool] = False

    def cdf(self, a, query, context=None) -> np.ndarray:
        raise NotImplementedError

    def interval_probability(self, lo, hi, query, context=None) -> np.ndarray:
        """Probability that the realized value falls in ``(lo, hi]``."""
        p = self.cdf(hi, query, context) - self.cdf(lo, query, context)
        return np.clip(p, 0.0, 1.0)

    def sample(self, query, rng: np.random.Generator, size=None, context=None):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _scale(self, base: float, query, context) -> np.ndarray | float:
        fn = getattr(self, "scale_fn", None)
        if fn is None:
            return base
        if context is None:
            context = np.asarray(query, dtype=float)[..., None]
        scale = np.asarray(fn(np.asarray(context, dtype=float)), dtype=float)
        scale = np.reshape(scale, np.shape(query))
        if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
            raise InvalidInputError("scale hook must return finite positive values")
        return scale


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise InvalidInputError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class Delta(NoiseModel):
    """No uncertainty: the realized value is the query."""

    kind: ClassVar[str] = "delta"

    def cdf(self, a, query, context=None):
        return (_as_float(a) >= _as_float(query)).astype(float)

    def sample(self, query, rng, size=None, context=None):
        q = _as_float(query)
        return np.broadcast_to(q, _sample_shape(q, size)).copy()

    def to_dict(self):
        return {"kind": self.kind}


def _sample_shape(q: np.ndarray, size):
    if size is None:
        return q.shape
    size = (size,) if np.isscalar(size) else tuple(size)
    return size + q.shape


@dataclass(frozen=True)
class Normal(NoiseModel):
    std: float
    scale_fn: ScaleFn | None = field(default=None, compare=False, repr=False)

    kind: ClassVar[str] = "normal"

    def __post_init__(self):
        _check_positive("std", self.std)

    def cdf(self, a, query, context=None):
        s = self._scale(self.std, query, context)
        return special.ndtr((_as_float(a) - _as_float(query)) / s)

    def sample(self, query, rng, size=None, context=None):
        q = _as_float(query)
        s = self._scale(self.std, q, context)
        return rng.normal(q, s, size=_sample_shape(q, size))

    def to_dict(self):
        return {"kind": self.kind, "std": self.std}


@dataclass(frozen=True)
class TruncatedNormal(NoiseModel):
    """Normal centred on the query, renormalized inside ``[low, high]``."""

    std: float
    low: float = -math.inf
    high: float = math.inf
    scale_fn: ScaleFn | None = field(default=None, compare=False, repr=False)

    kind: ClassVar[str] = "truncated_normal"

    def __post_init__(self):
        _check_positive("std", self.std)
        if not self.low < self.high:
            raise InvalidInputError("truncation bounds must satisfy low < high")
        if math.isnan(self.low) or math.isnan(self.high):
            raise InvalidInputError("truncation bounds must not be NaN")

    def _standardized(self, query, context):
        q = _as_float(query)
        s = self._scale(self.std, q, context)
        return q, s, (self.low - q) / s, (self.high - q) / s

    def cdf(self, a, query, context=None):
        q, s, alpha, beta = self._standardized(query, context)
        a = _as_float(a)
        out = stats.truncnorm.cdf(a, alpha, beta, loc=q, scale=s)
        # scipy returns nan at +/-inf for some broadcasts; the limits are exact
        out = np.where(a >= self.high, 1.0, np.where(a <= self.low, 0.0, out))
        return out

    def sample(self, query, rng, size=None, context=None):
        q, s, alpha, beta = self._standardized(query, context)
        shape = _sample_shape(q, size)
        return stats.truncnorm.rvs(alpha, beta, loc=q, scale=s, size=shape, random_state=rng)

    def to_dict(self):
        d = {"kind": self.kind, "std": self.std}
        if math.isfinite(self.low):
            d["low"] = self.low
        if math.isfinite(self.high):
            d["high"] = self.high
        return d


@dataclass(frozen=True)
class Uniform(NoiseModel):
    """Uniform on ``[query - width/2, query + width/2]``."""

    width: float
    scale_fn: ScaleFn | None = field(default=None, compare=False, repr=False)

    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        _check_positive("width", self.width)

    def cdf(self, a, query, context=None):
        q = _as_float(query)
        w = self._scale(self.width, q, context)
        return np.clip((_as_float(a) - (q - 0.5 * w)) / w, 0.0, 1.0)

    def sample(self, query, rng, size=None, context=None):
        q = _as_float(query)
        w = self._scale(self.width, q, context)
        return rng.uniform(q - 0.5 * w, q + 0.5 * w, size=_sample_shape(q, size))

    def to_dict(self):
        return {"kind": self.kind, "width": self.width}


def gamma_shape_scale(std, gap):
    """Shape and scale of a gamma law with standard deviation ``std`` whose
    mode sits ``gap`` units away from the origin of its support.

    Solves ``(k - 1) * theta = gap`` and ``k * theta**2 = std**2``; negative
    gaps are clamped to zero, which gives the exponential law (``k = 1``).
    """
    std = _as_float(std)
    b = np.maximum(_as_float(gap), 0.0)
    v = std**2
    k = 1.0 + b**2 / (2.0 * v) + b * np.sqrt(b**2 + 4.0 * v) / (2.0 * v)
    theta = std / np.sqrt(k)
    return k, theta


@dataclass(frozen=True)
class BoundedGamma(NoiseModel):
    """Gamma noise with one finite bound, mode at the query.

    With a lower bound the realized value is ``low + Y``; with an upper bound
    it is ``high - Y``, where ``Y ~ Gamma(k, theta)`` has standard deviation
    ``std`` and mode at the query's distance from the bound.
    """

    std: float
    low: float | None = None
    high: float | None = None
    scale_fn: ScaleFn | None = field(default=None, compare=False, repr=False)

    kind: ClassVar[str] = "gamma_bounded"

    def __post_init__(self):
        _check_positive("std", self.std)
        if (self.low is None) == (self.high is None):
            raise InvalidInputError("gamma_bounded needs exactly one of low/high")
        bound = self.low if self.low is not None else self.high
        if not math.isfinite(bound):
            raise InvalidInputError("gamma_bounded bound must be finite")

    @property
    def _upper(self) -> bool:
        return self.high is not None

    def _params(self, query, context):
        q = _as_float(query)
        s = self._scale(self.std, q, context)
        gap = (self.high - q) if self._upper else (q - self.low)
        return gamma_shape_scale(s, gap)

    def cdf(self, a, query, context=None):
        k, theta = self._params(query, context)
        a = _as_float(a)
        if self._upper:
            y = np.maximum((self.high - a) / theta, 0.0)
            return special.gammaincc(k, y)
        y = np.maximum((a - self.low) / theta, 0.0)
        return special.gammainc(k, y)

    def sample(self, query, rng, size=None, context=None):
        q = _as_float(query)
        k, theta = self._params(q, context)
        y = rng.gamma(k, theta, size=_sample_shape(q, size))
        return self.high - y if self._upper else self.low + y

    def to_dict(self):
        d = {"kind": self.kind, "std": self.std}
        if self._upper:
            d["high"] = self.high
        else:
            d["low"] = self.low
        return d


def _check_integral(query) -> np.ndarray:
    q = _as_float(query)
    if np.any(q != np.round(q)):
        raise InvalidInputError("discrete noise requires integer-valued queries")
    return q


@dataclass(frozen=True)
class ShiftedPoisson(NoiseModel):
    """``low + N`` with ``N ~ Poisson(rate)`` and the rate tied to the query.

    The rate is ``(query - low) + 0.5``: the midpoint of the rate interval on
    which ``query`` is the unique mode.  Queries below the bound are treated
    as sitting on it (rate 0.5, mode ``low``).
    """

    low: int = 0

    kind: ClassVar[str] = "poisson_shifted"
    is_discrete: ClassVar[bool] = True

    def __post_init__(self):
        if float(self.low) != int(self.low):
            raise InvalidInputError("poisson_shifted lower bound must be an integer")

    def rate(self, query) -> np.ndarray:
        return np.maximum(_check_integral(query) - self.low, 0.0) + 0.5

    def cdf(self, a, query, context=None):
        lam = self.rate(query)
        n = np.floor(_as_float(a)) - self.low
        with np.errstate(invalid="ignore"):
            out = special.pdtr(np.maximum(n, 0.0), lam)
        return np.where(n < 0, 0.0, np.where(np.isposinf(n), 1.0, out))

    def pmf(self, k, query) -> np.ndarray:
        lam = self.rate(query)
        n = _as_float(k) - self.low
        return np.where(n < 0, 0.0, stats.poisson.pmf(np.maximum(n, 0), lam))

    def sample(self, query, rng, size=None, context=None):
        q = _as_float(query)
        lam = self.rate(q)
        return (self.low + rng.poisson(lam, size=_sample_shape(q, size))).astype(float)

    def to_dict(self):
        return {"kind": self.kind, "low": int(self.low)}


def laplace_ratio(std: float) -> float:
    """Geometric ratio ``p = exp(-1/a)`` of a discrete Laplace law with the
    given standard deviation (variance ``2p / (1-p)**2``)."""
    v = float(std) ** 2
    return ((v + 1.0) - math.sqrt(2.0 * v + 1.0)) / v


@dataclass(frozen=True)
class DiscreteLaplace(NoiseModel):
    """Two-sided geometric noise on the integers, ``p(k) ~ exp(-|k - q| / a)``.

    Give either the target standard deviation ``std`` or the decay ``scale``
    (the ``a`` above) directly.
    """

    std: float | None = None
    scale: float | None = None

    kind: ClassVar[str] = "discrete_laplace"
    is_discrete: ClassVar[bool] = True

    def __post_init__(self):
        if (self.std is None) == (self.scale is None):
            raise InvalidInputError("discrete_laplace needs exactly one of std/scale")
        if self.std is not None:
            _check_positive("std", self.std)
        else:
            _check_positive("scale", self.scale)

    @property
    def ratio(self) -> float:
        if self.scale is not None:
            return math.exp(-1.0 / self.scale)
        return laplace_ratio(self.std)

    @property
    def decay(self) -> float:
        """The ``a`` in ``exp(-|k - q| / a)``."""
        return -1.0 / math.log(self.ratio)

    @property
    def stddev(self) -> float:
        p = self.ratio
        return math.sqrt(2.0 * p) / (1.0 - p)

    def cdf(self, a, query, context=None):
        q = _check_integral(query)
        p = self.ratio
        m = np.floor(_as_float(a)) - q
        with np.errstate(over="ignore", invalid="ignore"):
            upper = 1.0 - p ** (m + 1.0) / (1.0 + p)
            lower = p ** (-m) / (1.0 + p)
        out = np.where(m >= 0, upper, lower)
        return np.where(np.isnan(out), np.where(m > 0, 1.0, 0.0), out)

    def pmf(self, k, query) -> np.ndarray:
        q = _check_integral(query)
        p = self.ratio
        return (1.0 - p) / (1.0 + p) * p ** np.abs(_as_float(k) - q)

    def sample(self, query, rng, size=None, context=None):
        q = _check_integral(query)
        shape = _sample_shape(q, size)
        g = rng.geometric(1.0 - self.ratio, size=shape) - rng.geometric(1.0 - self.ratio, size=shape)
        return q + g

    def to_dict(self):
        if self.scale is not None:
            return {"kind": self.kind, "scale": self.scale}
        return {"kind": self.kind, "std": self.std}


@dataclass(frozen=True)
class CategoricalSimplex(NoiseModel):
    """Keep the queried category with probability ``stay``; otherwise move to
    one of the other categories uniformly."""

    categories: tuple
    stay: float = 1.0

    kind: ClassVar[str] = "categorical_simplex"
    is_categorical: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if len(self.categories) < 1 or len(set(self.categories)) != len(self.categories):
            raise InvalidInputError("categories must be a non-empty list of unique labels")
        if not (0.0 <= self.stay <= 1.0):
            raise InvalidInputError("stay probability must be in [0, 1]")
        if len(self.categories) == 1 and self.stay != 1.0:
            raise InvalidInputError("a single category can only have stay = 1")

    def cdf(self, a, query, context=None):
        raise UnsupportedOperationError("categorical noise has no CDF")

    def interval_probability(self, lo, hi, query, context=None):
        raise UnsupportedOperationError("categorical noise has no intervals")

    def index(self, category) -> int:
        try:
            return self.categories.index(category)
        except ValueError:
            raise InvalidInputError(f"unknown category {category!r}") from None

    def category_probability(self, query_category, category) -> float:
        qi, ci = self.index(query_category), self.index(category)
        if qi == ci:
            return float(self.stay)
        return (1.0 - self.stay) / (len(self.categories) - 1)

    def probability_table(self, query_indices) -> np.ndarray:
        """Rows of category probabilities for integer-coded queries."""
        q = np.asarray(query_indices, dtype=int)
        c = len(self.categories)
        off = (1.0 - self.stay) / (c - 1) if c > 1 else 0.0
        table = np.full(q.shape + (c,), off)
        np.put_along_axis(table, q[..., None], self.stay, axis=-1)
        return table

    def sample(self, query, rng, size=None, context=None):
        q = np.asarray(query, dtype=object)
        shape = _sample_shape(q, size)
        q_idx = np.vectorize(self.index, otypes=[int])(np.broadcast_to(q, shape))
        c = len(self.categories)
        stay = rng.random(shape) < self.stay
        if c > 1:
            hop = rng.integers(0, c - 1, size=shape)
            other = hop + (hop >= q_idx)
        else:
            other = q_idx
        idx = np.where(stay, q_idx, other)
        cats = np.array(self.categories, dtype=object)
        return cats[idx]

    def to_dict(self):
        return {"kind": self.kind, "categories": list(self.categories), "stay": self.stay}


_KINDS = {
    cls.kind: cls
    for cls in (Delta, Normal, TruncatedNormal, Uniform, BoundedGamma,
                ShiftedPoisson, DiscreteLaplace, CategoricalSimplex)
}


def from_dict(entry: dict) -> NoiseModel:
    """Build a model from one JSON entry, e.g. ``{"kind": "normal", "std": 1}``."""
    entry = dict(entry)
    entry.pop("name", None)
    try:
        cls = _KINDS[entry.pop("kind")]
    except KeyError as exc:
        raise InvalidInputError(f"unknown or missing noise kind: {exc}") from None
    if cls is TruncatedNormal:
        entry.setdefault("low", -math.inf)
        entry.setdefault("high", math.inf)
        entry["low"] = -math.inf if entry["low"] is None else float(entry["low"])
        entry["high"] = math.inf if entry["high"] is None else float(entry["high"])
    try:
        return cls(**entry)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {cls.kind}: {exc}") from None


def load_noise(path: str | Path, names: Sequence[str] | None = None) -> list[NoiseModel]:
    """Read a noise document: a JSON list of per-dimension entries.

    If entries carry a ``"name"`` and ``names`` is given, entries are matched
    to columns by name; columns without an entry get :class:`Delta`.
    Alternatively the document may be ``{"dimensions": [...]}``.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"noise file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"cannot parse noise document {path}: {exc}") from None
    if isinstance(doc, dict):
        doc = doc.get("dimensions")
    if not isinstance(doc, list):
        raise InvalidInputError("noise document must be a list of entries")
    if names is not None and doc and all("name" in e for e in doc):
        by_name = {e["name"]: e for e in doc}
        unknown = set(by_name) - set(names)
        if unknown:
            raise InvalidInputError(f"noise entries for unknown columns: {sorted(unknown)}")
        return [from_dict(by_name[n]) if n in by_name else Delta() for n in names]
    models = [from_dict(e) for e in doc]
    if names is not None and len(models) != len(names):
        raise InvalidInputError(
            f"noise document has {len(models)} entries for {len(names)} columns")
    return models


def dump_noise(models: Sequence[NoiseModel], names: Sequence[str] | None = None) -> list[dict]:
    out = []
    for i, m in enumerate(models):
        d = m.to_dict()
        if names is not None:
            d = {"name": names[i], **d}
        out.append(d)
    return out
