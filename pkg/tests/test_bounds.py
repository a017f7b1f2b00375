import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab import (ConstantsBundle, OptimizerConfig, Polyline, build_bundle, c1_limit_check, constant_C,
                       curly_brace_check, estimate_upper, min_sin_angle, proof_chain, rho_threshold,
                       scaling_experiment, vertical_curve)
from holderlab.bounds import curly_brace_sweep, loglog_fit, scaling_report_json, upper_bound_exploration

UNIT = dict(c_M=1.0, K=1.0, sin_phi0=1.0, alpha_norm=1.0)
positive = st.floats(1e-3, 1e3)
theta_open = st.floats(0.01, 0.99)


@pytest.mark.parametrize("theta", [0.1, 0.5, 0.9, 1.0])
def test_unit_constants_give_half(theta):
    assert constant_C(theta, **UNIT) == pytest.approx(0.5)


def test_smooth_limit_value():
    assert constant_C(1.0, 1 / (4 * math.pi), 1.0, 1.0, 1.0) == pytest.approx(math.sqrt(math.pi))


def test_C_vanishes_as_transversality_degrades():
    vals = [constant_C(0.5, 1.0, 1.0, s, 1.0) for s in (1e-1, 1e-3, 1e-6, 1e-9)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-5
    with pytest.raises(ValueError, match="not transverse"):
        constant_C(0.5, 1.0, 1.0, 0.0, 1.0)


def test_input_ranges():
    with pytest.raises(ValueError, match="theta"):
        constant_C(1.5, **UNIT)
    with pytest.raises(ValueError):
        constant_C(0.5, 1.0, -1.0, 1.0, 1.0)


def test_rho_examples():
    b = ConstantsBundle(0.5, **UNIT, delta_M=0.2, sigma=0.2, eta=0.1)
    assert b.tau == 0.2
    assert rho_threshold(b) == pytest.approx(0.1)
    big = ConstantsBundle(0.5, **UNIT, delta_M=1e6, sigma=1e6, eta=1e6)
    assert big.rho == pytest.approx(0.125)


@settings(max_examples=200)
@given(theta_open, positive, positive, st.floats(1e-3, 1.0), positive, positive, positive, positive)
def test_rho_never_exceeds_half_tau(theta, c_M, K, s, norm, dm, sig, eta):
    b = ConstantsBundle(theta, c_M, K, s, norm, dm, sig, eta)
    assert b.rho <= b.tau / 2
    assert b.rho <= eta


def test_curly_brace_examples():
    b = ConstantsBundle(0.5, **UNIT, delta_M=1e6, sigma=1e6)
    assert curly_brace_check(b, 0.0) == 1.0
    assert curly_brace_check(b, 1e-12) == pytest.approx(1.0, abs=1e-3)
    assert curly_brace_check(b, 0.12) == pytest.approx(1 - 0.12 ** (1 / 3), rel=1e-12)
    assert curly_brace_check(b, 0.12) == pytest.approx(0.5068, abs=1e-4)
    assert curly_brace_check(b, b.rho) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        curly_brace_check(b, 0.2)


@settings(max_examples=200)
@given(theta_open, positive, positive, st.floats(1e-3, 1.0), positive, st.floats(0.0, 1.0))
def test_curly_brace_is_at_least_half_below_rho(theta, c_M, K, s, norm, frac):
    b = ConstantsBundle(theta, c_M, K, s, norm, 1e6, 1e6)
    assert curly_brace_check(b, frac * b.rho) >= 0.5 - 1e-12


def test_curly_brace_sweep_minimum():
    worst = curly_brace_sweep(20, 1000, seed=0)
    assert 0.5 <= worst < 0.51


@settings(max_examples=100)
@given(theta_open, st.floats(1e-3, 1.0), st.floats(1.0, 10.0))
def test_C_decreases_in_K_and_norm(theta, s, factor):
    base = constant_C(theta, 0.5, 1.0, s, 1.0)
    assert constant_C(theta, 0.5, factor, s, 1.0) <= base * (1 + 1e-12)
    assert constant_C(theta, 0.5, 1.0, s, factor) <= base * (1 + 1e-12)


def test_bundle_record_roundtrip():
    b = ConstantsBundle(0.4, 0.2, 3.0, 0.7, 1.5, 0.5, 0.5, 0.01)
    again = ConstantsBundle.from_record({k: repr(v) for k, v in b.to_record().items()})
    assert again == b
    assert b.to_record()["constants.C"] == b.C


def test_limit_tables():
    unit = c1_limit_check(1.0, 1.0, 1.0, 1.0)
    np.testing.assert_allclose(unit.values, 0.5)
    approach = c1_limit_check(1 / (4 * math.pi), 1.0, 1.0, 1.0)
    assert approach.monotone and np.all(np.diff(approach.values) > 0)
    assert approach.limit == pytest.approx(math.sqrt(math.pi))
    assert approach.rel_gap_at_end <= 1e-2
    other = c1_limit_check(2.0, 3.0, 1.5, 0.8)
    assert other.finite and other.limit == pytest.approx(1 / (2 * (2 * 3 * 1.5 / 0.8) ** 0.5))
    assert other.rel_gap_at_end <= 1e-2
    with pytest.raises(ValueError):
        c1_limit_check(1.0, 1.0, 1.0, 1.0, thetas=[0.9, 1.0])


def test_min_sin_angle_examples(heisenberg):
    assert min_sin_angle(heisenberg, vertical_curve([0, 0, 0], 0.3)) == pytest.approx(1.0)
    assert min_sin_angle(heisenberg, vertical_curve([1, 0, 0], 0.3)) == pytest.approx(2 / math.sqrt(5))
    with pytest.raises(ValueError, match="not transverse"):
        min_sin_angle(heisenberg, Polyline([[0, 0, 0], [0.5, 0, 0]]))


def test_build_bundle_uses_normalized_norm(perturbed):
    b = build_bundle(perturbed, 0.5, vertical_curve([0, 0, 0], 0.01), K=0.1, eta=0.01)
    assert b.alpha_norm == perturbed.normalized().norm_upper
    assert 0.99 < b.sin_phi0 <= 1.0
    assert b.rho <= 0.01


def test_loglog_fit_recovers_power():
    x = np.geomspace(1e-3, 1e-1, 6)
    slope, intercept, r2 = loglog_fit(x, 3 * x**0.7)
    assert slope == pytest.approx(0.7) and math.exp(intercept) == pytest.approx(3.0) and r2 == pytest.approx(1.0)


def test_scaling_validation(heisenberg):
    curve = vertical_curve([0, 0, 0], 0.1)
    with pytest.raises(ValueError, match="at least 3"):
        scaling_experiment(heisenberg, 0.5, curve, [0.1, 0.05])
    b = ConstantsBundle(0.5, **UNIT, delta_M=1e6, sigma=1e6, eta=0.01)
    with pytest.raises(ValueError, match="rho"):
        scaling_experiment(heisenberg, 0.5, curve, [0.1, 0.05, 0.02], bundle=b)
    with pytest.raises(ValueError, match="not transverse"):
        scaling_experiment(heisenberg, 0.5, Polyline([[0, 0, 0], [0.2, 0, 0]]), [0.1, 0.05, 0.02])


def test_perturbed_decay_rate_and_pointwise_bound(perturbed):
    cfg = OptimizerConfig(restarts=4)
    res = scaling_experiment(perturbed, 0.5, vertical_curve([0, 0, 0], 0.1), [0.1, 0.05, 0.02, 0.01], cfg)
    assert not res.partial
    assert res.fitted_slope <= 1 / 1.5 + 0.05
    rows = upper_bound_exploration(res, 0.5)
    assert len(rows) == 4 and all(r["ratio_holder"] > 0 for r in rows)
    assert '"fitted_slope"' in scaling_report_json(res)


def test_foliation_never_reaches_vertical_targets(foliation):
    cfg = OptimizerConfig(restarts=2, step_budget=40)
    res = scaling_experiment(foliation, 0.5, vertical_curve([0, 0, 0], 0.04), [0.04, 0.02, 0.01], cfg)
    assert res.partial and not res.converged.any()
    np.testing.assert_allclose(res.endpoint_gaps, res.epsilons, rtol=1e-9)


def test_proof_chain_links(perturbed):
    b = ConstantsBundle(0.5, 1 / (2 * math.pi), 0.0733, 0.9999, perturbed.normalized().norm_upper, eta=0.002)
    cfg = OptimizerConfig(restarts=2)
    for z in (0.0005, 0.0015):
        q = np.array([0, 0, z])
        est = estimate_upper(perturbed, [0, 0, 0], q, cfg)
        assert est.converged
        gamma1 = Polyline(np.vstack([est.path.vertices[:-1], q]))
        chain = proof_chain(perturbed, b, Polyline([[0, 0, 0], q]), gamma1)
        assert all(chain.links().values()), chain
        # the final inequality of the chain: |gamma0| >= C |gamma1|^(1+theta) given the curly brace
        assert chain.gamma1 >= b.C * chain.gamma0 ** (1 / 1.5)


@settings(max_examples=100)
@given(theta_open, st.floats(1e-3, 0.5), st.floats(1.01, 2.0), st.floats(0.01, 10.0))
def test_C_sign_structure(theta, s, factor, c_M):
    base = constant_C(theta, c_M, 1.0, s, 1.0)
    assert constant_C(theta, c_M, 1.0, s * factor, 1.0) > base
    assert constant_C(theta, c_M * factor, 1.0, s, 1.0) < base
    assert constant_C(theta, c_M, factor, s, 1.0) < base
