import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab import GridSpec, HoelderField, eval_field, hoelder_norm_estimate, synth_weierstrass

BOX = ([-0.5] * 3, [0.5] * 3)


def test_sup_bound_is_geometric():
    f = synth_weierstrass(0.5, 4.0, 8, 1.0, seed=1)
    assert f.sup_bound == pytest.approx(sum(2.0**-k for k in range(9)))
    assert f.sup_bound < 2
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, (5000, 3))
    assert np.max(np.abs(f(pts))) <= f.sup_bound


def test_zero_field():
    f = synth_weierstrass(0.5, 4.0, 0, 0.0, seed=7)
    assert f.analytic_norm_bound == 0.0
    assert np.all(f(np.random.default_rng(1).normal(size=(10, 3))) == 0.0)
    assert eval_field(f, [0.3, 0.1, -0.2]) == 0.0


def test_single_cosine_term_at_origin():
    f = HoelderField(0.5, 4.0, 0, np.zeros(1), np.array([[1.0, 0.0, 0.0]]))
    assert eval_field(f, [0.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert eval_field(f, [0.25, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


def test_periodic_along_each_axis(rng):
    f = synth_weierstrass(0.4, 4.0, 8, 1.0, seed=2)
    x = rng.uniform(-3, 3, (100, 3))
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = f.period
        np.testing.assert_allclose(f(x), f(x + shift), atol=1e-9)


@pytest.mark.parametrize("bad", [0.0, 1.0, 1.5, -0.2])
def test_theta_range(bad):
    with pytest.raises(ValueError, match=r"theta must lie in \(0,1\)"):
        synth_weierstrass(bad)


def test_lambda_range():
    with pytest.raises(ValueError, match="lambda"):
        synth_weierstrass(0.5, lam=1.5)


def test_record_roundtrip():
    f = synth_weierstrass(0.3, 2.0, 12, 0.7, seed=3)
    g = HoelderField.from_record(f.to_record())
    x = np.random.default_rng(0).uniform(-1, 1, (50, 3))
    np.testing.assert_array_equal(f(x), g(x))
    assert g.analytic_norm_bound == f.analytic_norm_bound


def test_constant_field_has_sup_norm_only():
    est = hoelder_norm_estimate(lambda x: np.full(len(x), 3.0), 0.4, BOX, GridSpec(9, 500))
    assert est == pytest.approx(3.0)


def _brute_force(values, xs, theta):
    diff = np.abs(values[:, None] - values[None, :])
    dist = np.abs(xs[:, None] - xs[None, :])
    np.fill_diagonal(dist, 1.0)
    return np.max(np.abs(values)) + np.max(diff / dist**theta)


@pytest.mark.parametrize("f, lo, hi", [
    (lambda x: np.abs(x) ** 0.5, -1.0, 1.0),
    (lambda x: x, 0.0, 1.0),
])
def test_one_dimensional_oracles(f, lo, hi):
    # brute force over every pair of a 10^4-point grid, in row blocks
    xs = np.linspace(lo, hi, 10_001)
    vals = f(xs)
    semi = 0.0
    for i in range(0, len(xs), 500):
        d = np.abs(xs[i:i + 500, None] - xs[None, :])
        d[d == 0] = np.inf
        semi = max(semi, np.max(np.abs(vals[i:i + 500, None] - vals[None, :]) / d**0.5))
    oracle = np.max(np.abs(vals)) + semi
    assert oracle == pytest.approx(2.0, rel=0.02)
    est = hoelder_norm_estimate(lambda p: f(p[:, 0]), 0.5, ([lo], [hi]), GridSpec(1025, 20_000))
    assert est == pytest.approx(oracle, rel=0.02)
    assert est <= oracle + 1e-12


def test_estimator_matches_small_brute_force(rng):
    xs = np.linspace(0.0, 1.0, 33)
    f = synth_weierstrass(0.5, 2.0, 6, 1.0, seed=4)
    line = lambda t: f(np.stack([t, np.full_like(t, 0.1), np.full_like(t, 0.2)], 1))  # noqa: E731
    oracle = _brute_force(line(xs), xs, 0.5)
    est = hoelder_norm_estimate(lambda p: line(p[:, 0]), 0.5, ([0.0], [1.0]), GridSpec(33, 1))
    # the estimator samples a subset of the pairs the oracle sees, plus random ones
    assert est <= _brute_force(line(np.linspace(0, 1, 2049)), np.linspace(0, 1, 2049), 0.5) + 1e-9
    assert est >= 0.9 * oracle


def test_nested_refinement_is_monotone():
    f = synth_weierstrass(0.3, 2.0, 12, 1.0, seed=3)
    ests = [hoelder_norm_estimate(f, 0.3, BOX, GridSpec(2**m + 1, 2000, 5)) for m in range(2, 6)]
    assert all(a <= b + 1e-12 for a, b in zip(ests, ests[1:]))


@pytest.mark.parametrize("resolution", [16, 32, 64, 128, 256, 512])
def test_line_restriction_below_analytic_bound(resolution):
    f = synth_weierstrass(0.3, 2.0, 12, 1.0, seed=3)
    line = lambda t: f(np.stack([t[:, 0], np.full(len(t), 0.3), np.full(len(t), -0.1)], 1))  # noqa: E731
    assert hoelder_norm_estimate(line, 0.3, ([0.0], [1.0]), GridSpec(resolution, 5000)) <= f.analytic_norm_bound


@pytest.mark.parametrize("resolution", [16, 32, 64])
def test_volume_grid_below_analytic_bound(resolution):
    f = synth_weierstrass(0.3, 2.0, 12, 1.0, seed=3)
    assert hoelder_norm_estimate(f, 0.3, BOX, GridSpec(resolution, 5000)) <= f.analytic_norm_bound


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0.05, 0.95), lam=st.sampled_from([2.0, 3.0, 4.0]), depth=st.integers(0, 8),
       seed=st.integers(0, 2**16))
def test_estimate_never_exceeds_analytic_bound(theta, lam, depth, seed):
    f = synth_weierstrass(theta, lam, depth, 1.0, seed)
    assert hoelder_norm_estimate(f, theta, BOX, GridSpec(9, 300, seed)) <= f.analytic_norm_bound * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(budget=st.integers(1, 400), extra=st.integers(1, 400))
def test_more_pairs_never_lower_the_estimate(budget, extra):
    f = synth_weierstrass(0.5, 4.0, 6, 1.0, 11)
    small = hoelder_norm_estimate(f, 0.5, BOX, GridSpec(5, budget, 1))
    large = hoelder_norm_estimate(f, 0.5, BOX, GridSpec(5, budget + extra, 1))
    assert large >= small


def test_domain_errors():
    with pytest.raises(ValueError, match="degenerate"):
        hoelder_norm_estimate(lambda x: x[:, 0], 0.5, ([0.0, 0.0], [1.0, 0.0]), GridSpec(5, 10))
    with pytest.raises(ValueError, match="theta"):
        hoelder_norm_estimate(lambda x: x[:, 0], 1.0, ([0.0], [1.0]), GridSpec(5, 10))
    with pytest.raises(ValueError, match="too large"):
        hoelder_norm_estimate(lambda x: x[:, 0], 0.5, BOX, GridSpec(2**9, 10))
    assert math.isfinite(hoelder_norm_estimate(lambda x: x[:, 0], 0.5, ([0.0], [1.0]), GridSpec(2, 1)))
