import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from robustree.errors import InvalidInputError, UnsupportedOperationError
from robustree.noise import (BoundedGamma, CategoricalSimplex, Delta, DiscreteLaplace, Normal,
                             ShiftedPoisson, TruncatedNormal, Uniform, dump_noise, from_dict,
                             gamma_shape_scale, laplace_ratio, load_noise)


def test_normal_median_at_query():
    assert Normal(1.0).cdf(0.0, 0.0) == pytest.approx(0.5)


def test_uniform_upper_edge_is_full_mass():
    assert Uniform(1.5).cdf(0.75, 0.0) == pytest.approx(1.0)
    assert Uniform(1.5).cdf(-0.75, 0.0) == pytest.approx(0.0)


def test_truncated_normal_renormalizes():
    expected = (stats.norm.cdf(1) - 0.5) / 0.5
    assert TruncatedNormal(1.0, low=0.0).cdf(1.0, 0.0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.6827, abs=1e-4)


@pytest.mark.parametrize("model,q", [
    (Delta(), 0.3), (Normal(0.5), 0.1), (TruncatedNormal(0.5, -1, 2), 0.0), (Uniform(2.0), 1.0),
    (BoundedGamma(1.0, low=0.0), 2.0), (BoundedGamma(2.0, high=5.0), 4.0),
    (ShiftedPoisson(1), 3.0), (DiscreteLaplace(std=3.0), 5.0), (DiscreteLaplace(scale=3.0), 5.0),
])
def test_whole_line_has_unit_mass(model, q):
    assert model.interval_probability(-np.inf, np.inf, q) == pytest.approx(1.0, abs=1e-12)
    assert model.cdf(-np.inf, q) == pytest.approx(0.0, abs=1e-12)


def test_delta_intervals():
    d = Delta()
    assert d.interval_probability(1, 3, 2) == 1.0
    assert d.interval_probability(3, 5, 2) == 0.0


def test_poisson_interval_matches_pmf_at_mode():
    m = ShiftedPoisson(1)
    p = m.interval_probability(0.5, 1.5, 1.0)
    assert p == pytest.approx(float(m.pmf(1, 1.0)), abs=1e-15)
    # summing the pmf reproduces the cdf
    ks = np.arange(0, 60)
    assert float(m.pmf(ks, 4.0).sum()) == pytest.approx(1.0, abs=1e-12)
    assert float(m.cdf(6.0, 4.0)) == pytest.approx(float(m.pmf(np.arange(0, 7), 4.0).sum()), abs=1e-14)


@pytest.mark.parametrize("q", [1, 2, 5, 11])
def test_poisson_mode_at_query(q):
    m = ShiftedPoisson(1)
    ks = np.arange(1, 60)
    assert ks[np.argmax(m.pmf(ks, float(q)))] == q


def test_poisson_below_bound_floors_at_bound():
    m = ShiftedPoisson(3)
    ks = np.arange(0, 30)
    pmf = m.pmf(ks, 1.0)
    assert pmf[:3].sum() == 0.0
    assert ks[np.argmax(pmf)] == 3


def test_discrete_laplace_std_and_scale():
    m = DiscreteLaplace(std=3.0)
    ks = np.arange(-400, 401)
    pmf = m.pmf(ks, 0.0)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert math.sqrt(float((pmf * ks**2).sum())) == pytest.approx(3.0, rel=1e-10)
    assert m.stddev == pytest.approx(3.0)
    s = DiscreteLaplace(scale=3.0)
    assert s.ratio == pytest.approx(math.exp(-1 / 3))
    assert s.pmf(1, 0.0) / s.pmf(0, 0.0) == pytest.approx(math.exp(-1 / 3))


def test_discrete_laplace_cdf_matches_pmf_sum():
    m = DiscreteLaplace(scale=2.0)
    ks = np.arange(-300, 301)
    pmf = m.pmf(ks, 4.0)
    for a in (-3, 0, 4, 4.5, 9):
        assert float(m.cdf(a, 4.0)) == pytest.approx(float(pmf[ks <= a].sum()), abs=1e-12)


def test_laplace_ratio_inverts_variance():
    for s in (0.3, 1.0, 3.0, 10.0):
        p = laplace_ratio(s)
        assert 2 * p / (1 - p) ** 2 == pytest.approx(s**2, rel=1e-12)


def test_gamma_shape_scale_solves_mode_and_std():
    k, theta = gamma_shape_scale(2.0, 3.0)
    assert (k - 1) * theta == pytest.approx(3.0)
    assert math.sqrt(k) * theta == pytest.approx(2.0)
    k0, _ = gamma_shape_scale(2.0, 0.0)
    assert k0 == pytest.approx(1.0)


def test_bounded_gamma_mode_and_support():
    m = BoundedGamma(2.0, high=5.0)
    xs = np.linspace(-20, 5, 250_001)
    pdf = np.gradient(m.cdf(xs, 3.0), xs)
    assert xs[np.argmax(pdf)] == pytest.approx(3.0, abs=1e-3)
    assert m.cdf(5.0, 3.0) == pytest.approx(1.0)
    assert m.interval_probability(5.0, np.inf, 3.0) == 0.0
    draws = m.sample(3.0, np.random.default_rng(0), size=200_000)
    assert draws.max() <= 5.0
    assert draws.std() == pytest.approx(2.0, rel=0.02)
    low = BoundedGamma(1.0, low=0.0)
    assert low.cdf(0.0, 2.0) == 0.0
    assert low.sample(2.0, np.random.default_rng(1), size=10_000).min() >= 0.0


def test_category_probability():
    cats = ("a", "b", "c", "d")
    frozen = CategoricalSimplex(cats, 1.0)
    assert frozen.category_probability("b", "b") == 1.0
    assert frozen.category_probability("b", "c") == 0.0
    m = CategoricalSimplex(cats, 0.7)
    assert m.category_probability("a", "c") == pytest.approx(0.1)
    for q in cats:
        assert sum(m.category_probability(q, c) for c in cats) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        m.category_probability("a", "z")
    with pytest.raises(UnsupportedOperationError):
        m.cdf(0.0, "a")


def test_probability_table_rows_sum_to_one():
    m = CategoricalSimplex(("x", "y", "z"), 0.4)
    table = m.probability_table(np.array([0, 2, 1]))
    np.testing.assert_allclose(table.sum(axis=1), 1.0)
    assert table[1, 2] == pytest.approx(0.4)


@pytest.mark.parametrize("model,q", [
    (Normal(0.7), 0.2), (TruncatedNormal(0.6, low=0.0), 0.1), (Uniform(1.5), 0.0),
    (BoundedGamma(2.0, high=5.0), 4.0), (BoundedGamma(0.5, low=-1.0), 0.0),
])
def test_samples_follow_cdf(model, q):
    draws = model.sample(q, np.random.default_rng(42), size=100_000)
    ks = stats.kstest(draws, lambda a: model.cdf(a, q)).statistic
    assert ks < 0.01


@pytest.mark.parametrize("model,q", [
    (ShiftedPoisson(1), 4.0), (DiscreteLaplace(std=3.0), 0.0), (DiscreteLaplace(scale=1.5), 2.0),
])
def test_discrete_samples_follow_pmf(model, q):
    draws = model.sample(q, np.random.default_rng(7), size=100_000)
    ks_ = np.arange(draws.min(), draws.max() + 1)
    emp = np.array([(draws <= k).mean() for k in ks_])
    assert np.max(np.abs(emp - model.cdf(ks_, q))) < 0.01


def test_delta_sample_is_query():
    assert np.all(Delta().sample(1.25, np.random.default_rng(0), size=10) == 1.25)
    assert np.all(np.abs(Uniform(1.5).sample(0.0, np.random.default_rng(0), size=10_000)) <= 0.75)
    assert TruncatedNormal(1.0, low=0.0).sample(0.0, np.random.default_rng(3), size=1_000_000).min() >= 0


@pytest.mark.parametrize("model", [Normal(0.4), TruncatedNormal(0.4, 0.0, 1.0),
                                   BoundedGamma(0.4, high=1.0)])
def test_sample_std_matches_parameter(model):
    q = 0.5
    draws = model.sample(q, np.random.default_rng(11), size=400_000)
    if isinstance(model, TruncatedNormal):
        target = stats.truncnorm((0 - q) / 0.4, (1 - q) / 0.4, loc=q, scale=0.4).std()
    else:
        target = 0.4
    n = len(draws)
    se = draws.std() * math.sqrt((stats.kurtosis(draws, fisher=False) - 1) / (4 * n))
    assert abs(draws.std() - target) < 3 * se + 1e-12


@settings(max_examples=60, deadline=None)
@given(std=st.floats(0.05, 3.0), q=st.floats(-3, 3),
       cuts=st.lists(st.floats(-8, 8), min_size=1, max_size=12))
def test_disjoint_cover_sums_to_one(std, q, cuts):
    edges = np.concatenate([[-np.inf], np.unique(cuts), [np.inf]])
    for model in (Normal(std), Uniform(std), TruncatedNormal(std, -2.0, 2.5),
                  BoundedGamma(std, high=3.5), BoundedGamma(std, low=-3.5)):
        total = float(np.sum(model.interval_probability(edges[:-1], edges[1:], q)))
        assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(q=st.integers(-5, 15), cuts=st.lists(st.floats(-30, 30), min_size=1, max_size=10),
       std=st.floats(0.3, 5.0))
def test_discrete_cover_sums_to_one(q, cuts, std):
    edges = np.concatenate([[-np.inf], np.unique(cuts), [np.inf]])
    for model in (ShiftedPoisson(0), DiscreteLaplace(std=std), DiscreteLaplace(scale=std)):
        total = float(np.sum(model.interval_probability(edges[:-1], edges[1:], float(q))))
        assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(-2, 2), a=st.lists(st.floats(-10, 10), min_size=2, max_size=20))
def test_cdf_monotone(q, a):
    a = np.sort(a)
    for model in (Normal(0.5), Uniform(1.0), TruncatedNormal(1.0, -1, 1), BoundedGamma(1.0, high=2.5)):
        assert np.all(np.diff(model.cdf(a, q)) >= -1e-15)


def test_bound_respect():
    assert BoundedGamma(1.0, high=5.0).interval_probability(5.0, 100.0, 4.0) == 0.0
    assert ShiftedPoisson(2).cdf(1.9, 3.0) == 0.0
    tn = TruncatedNormal(1.0, low=0.0, high=1.0)
    assert tn.cdf(0.0, 0.5) == 0.0 and tn.cdf(1.0, 0.5) == 1.0


def test_scale_hook_depends_on_full_query():
    m = Normal(1.0, scale_fn=lambda x: 0.1 + np.abs(x[..., 1]))
    ctx = np.array([[0.0, 1.0], [0.0, 2.0]])
    out = m.cdf(1.0, np.array([0.0, 0.0]), context=ctx)
    np.testing.assert_allclose(out, stats.norm.cdf(1.0, scale=[1.1, 2.1]))
    with pytest.raises(InvalidInputError):
        Normal(1.0, scale_fn=lambda x: -1.0).cdf(0.0, 0.0)


def test_discrete_noise_rejects_fractional_queries():
    with pytest.raises(InvalidInputError):
        ShiftedPoisson(0).cdf(1.0, 0.5)


@pytest.mark.parametrize("bad", [
    lambda: Normal(0.0), lambda: Uniform(-1.0), lambda: TruncatedNormal(1.0, 2.0, 1.0),
    lambda: BoundedGamma(1.0), lambda: BoundedGamma(1.0, low=0.0, high=1.0),
    lambda: DiscreteLaplace(), lambda: CategoricalSimplex(("a",), 0.5),
    lambda: CategoricalSimplex(("a", "b"), 1.5), lambda: Normal(float("nan")),
])
def test_invalid_parameters(bad):
    with pytest.raises(InvalidInputError):
        bad()


def test_json_round_trip(tmp_path):
    models = [Delta(), Normal(1.0), TruncatedNormal(0.5, low=0.0), Uniform(1.5),
              BoundedGamma(2.0, high=5.0), ShiftedPoisson(1), DiscreteLaplace(std=3.0),
              DiscreteLaplace(scale=2.0), CategoricalSimplex(("a", "b"), 0.8)]
    names = [f"c{i}" for i in range(len(models))]
    path = tmp_path / "noise.json"
    path.write_text(json.dumps(dump_noise(models, names)))
    assert load_noise(path, names) == models
    assert from_dict({"kind": "normal", "std": 2}) == Normal(2.0)


def test_load_noise_matches_by_name(tmp_path):
    path = tmp_path / "n.json"
    path.write_text(json.dumps({"dimensions": [{"name": "b", "kind": "normal", "std": 1.0}]}))
    assert load_noise(path, ["a", "b"]) == [Delta(), Normal(1.0)]
    path.write_text(json.dumps([{"name": "zz", "kind": "normal", "std": 1.0}]))
    with pytest.raises(InvalidInputError):
        load_noise(path, ["a", "b"])
    with pytest.raises(InvalidInputError):
        load_noise(tmp_path / "missing.json")
    with pytest.raises(InvalidInputError):
        from_dict({"kind": "cauchy"})
