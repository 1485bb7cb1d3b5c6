import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustree.errors import InvalidInputError
from robustree.noise import Delta, DiscreteLaplace
from conftest import CACHE
from robustree.surfaces import (IMPROVEMENT, LABELS, benchmark_spec,
                                delta_spec, eval_surface, get_surface, ground_truth, pmf_matrix,
                                spearman)


def test_closed_form_values():
    assert eval_surface(get_surface("sine"), np.zeros(2)) == 0.0
    assert eval_surface(get_surface("cliff", 1), np.zeros(1)) == pytest.approx(10 / 1.3)
    assert eval_surface(get_surface("cliff", 1), np.zeros(1)) == pytest.approx(7.6923, abs=1e-4)
    # the cap binds outside the domain, where noisy inputs can land
    assert eval_surface(get_surface("bertsimas"), np.array([-2.0, -1.5])) == 80.0
    assert eval_surface(get_surface("bertsimas"), np.array([-1.0, -0.5])) == pytest.approx(60.165625)


def dense_argmin(surface, n):
    axes = [np.linspace(lo, hi, n) for lo, hi in surface.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.column_stack([m.ravel() for m in mesh])
    cell = np.array([a[1] - a[0] for a in axes])
    return P[np.argmin(surface.evaluate(P))], cell


@pytest.mark.parametrize("name,dims", [("bertsimas", 2), ("cliff", 2), ("sine", 2), ("cliff", 1),
                                       ("sine", 3)])
def test_known_minima_within_one_cell(name, dims):
    s = get_surface(name, dims)
    x, cell = dense_argmin(s, 400 if dims <= 2 else 101)
    assert np.all(np.abs(x - np.array(s.minimizer)) <= cell)


@pytest.mark.parametrize("name", ["discrete_cliff", "discrete_bertsimas"])
def test_discrete_minima(name):
    s = get_surface(name)
    levels = np.arange(1, 23, dtype=float)
    P = np.array([(i, j) for i in levels for j in levels])
    assert tuple(P[np.argmin(s.evaluate(P))]) == s.minimizer


def test_discrete_domain_checks():
    s = get_surface("discrete_cliff")
    with pytest.raises(InvalidInputError):
        s.evaluate([[0, 5]])
    with pytest.raises(InvalidInputError):
        s.evaluate([[1.5, 5]])
    assert np.isfinite(s.evaluate([[0, 23]], extrapolate=True)).all()
    assert s.evaluate([[1, 22]])[0] == pytest.approx(get_surface("cliff").evaluate([[0.0, 5.0]])[0])
    with pytest.raises(InvalidInputError):
        get_surface("rosenbrock")


def test_spec_table():
    assert LABELS == tuple(f"S{i}" for i in range(1, 9))
    kinds = [benchmark_spec(l).noise[0].kind for l in LABELS]
    assert kinds == ["normal", "gamma_bounded", "uniform", "normal", "uniform", "normal",
                     "discrete_laplace", "poisson_shifted"]
    s2 = benchmark_spec("S2").noise[0]
    assert s2.std == 2.0 and s2.high == 5.0
    assert benchmark_spec("S8").noise[0].low == 1
    assert benchmark_spec("S1").budget == 196 and benchmark_spec("S7").budget == 64
    with pytest.raises(InvalidInputError):
        benchmark_spec("S9")


def test_high_dimensional_variant():
    spec = benchmark_spec("S1", extra_dims=2)
    assert spec.dims == 4 and spec.noisy_dims == [0, 1]
    assert all(isinstance(m, Delta) for m in spec.noise[2:])


def test_high_dimensional_truth_adds_noiseless_terms(truth_of):
    base = truth_of("S1")
    gt = ground_truth(benchmark_spec("S1", extra_dims=2), 200, cache_dir=CACHE)
    assert gt.extra_dims == 2
    x = np.array([[2.0, 2.0, 1.0, 3.0]])
    expected = base.lookup(x[:, :2]) + get_surface("cliff", 2).evaluate(x[:, 2:])
    np.testing.assert_allclose(gt.lookup(x), expected)


def test_delta_ground_truth_equals_surface():
    spec = delta_spec(benchmark_spec("S3"))
    gt = ground_truth(spec, density=60)
    np.testing.assert_allclose(gt.flat_values, spec.surface.evaluate(gt.points), rtol=0, atol=1e-12)
    disc = delta_spec(benchmark_spec("S7"))
    gtd = ground_truth(disc)
    np.testing.assert_allclose(gtd.flat_values, disc.surface.evaluate(gtd.points), atol=1e-12)


def test_s1_robust_minimum_moves_away_from_cliff(truth_of):
    gt = truth_of("S1")
    assert np.all(gt.robust_min > 1.02874 + 0.5)


@pytest.mark.parametrize("label", LABELS)
def test_improvement_matches_table(label, truth_of):
    assert 100 * truth_of(label).improvement == pytest.approx(IMPROVEMENT[label], abs=5)


def test_s1_improvement_tight(truth_of):
    assert 100 * truth_of("S1").improvement == pytest.approx(25, abs=3)


@pytest.mark.parametrize("label", ["S1", "S6"])
def test_ground_truth_stable_under_refinement(label):
    spec = benchmark_spec(label)
    coarse = ground_truth(spec, density=100)
    fine = ground_truth(spec, density=200)
    diff = np.abs(fine.lookup(coarse.points) - coarse.flat_values)
    assert diff.max() < 0.02 * coarse.value_range


def test_discrete_truth_by_direct_sum():
    spec = benchmark_spec("S7")
    gt = ground_truth(spec)
    m = spec.noise[0]
    ks = np.arange(-150, 175, dtype=float)
    q = np.array([9.0, 3.0])
    w0, w1 = m.pmf(ks, q[0]), m.pmf(ks, q[1])
    K0, K1 = np.meshgrid(ks, ks, indexing="ij")
    F = spec.surface.evaluate(np.column_stack([K0.ravel(), K1.ravel()]), extrapolate=True)
    direct = float(np.einsum("i,j,ij->", w0, w1, F.reshape(len(ks), len(ks))))
    assert gt.lookup(q[None, :])[0] == pytest.approx(direct, rel=1e-10)


def test_pmf_matrix_rows():
    P = pmf_matrix(DiscreteLaplace(scale=3.0), np.arange(1.0, 23.0), np.arange(-200.0, 223.0))
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_cache_round_trip(tmp_path):
    spec = benchmark_spec("S5")
    a = ground_truth(spec, density=50, cache_dir=tmp_path)
    assert (tmp_path / "S5_d50_s0.csv").exists()
    b = ground_truth(spec, density=50, cache_dir=tmp_path)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.raw_min_value == b.raw_min_value


def test_lookup_is_nearest_neighbor(truth_of):
    gt = truth_of("S4")
    p = gt.points[12345]
    nudge = 0.3 * gt.spacing()
    assert gt.lookup(p + nudge)[0] == gt.flat_values[12345]
    assert gt.lookup(p - nudge)[0] == gt.flat_values[12345]


def test_spearman_examples():
    assert spearman([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
    with pytest.raises(InvalidInputError):
        spearman([1, 2], [1, 2, 3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(-10, 10)), min_size=3, max_size=30))
def test_spearman_bounded_and_matches_pearson_of_ranks(pairs):
    from scipy import stats
    a, b = map(np.array, zip(*pairs))
    r = spearman(a, b)
    if np.isnan(r):
        assert np.ptp(a) == 0 or np.ptp(b) == 0
        return
    assert -1 - 1e-12 <= r <= 1 + 1e-12
    assert r == pytest.approx(stats.spearmanr(a, b).statistic, abs=1e-9)
