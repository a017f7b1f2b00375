import math

import numpy as np
import pytest

from holderlab import (OptimizerConfig, Polyline, build_model, estimate_upper, heisenberg_vertical_exact,
                       horizontality_defect, path_length, reachability_probe)
from holderlab.paths import concatenate

FAST = OptimizerConfig(restarts=2)


def test_vertical_oracle():
    assert heisenberg_vertical_exact(0.0) == 0.0
    assert heisenberg_vertical_exact(0.1) == pytest.approx(1.1209982432795857, rel=1e-12)
    assert heisenberg_vertical_exact(0.4) / heisenberg_vertical_exact(0.1) == pytest.approx(2.0, rel=1e-14)
    assert heisenberg_vertical_exact(-0.1) == heisenberg_vertical_exact(0.1)


def test_same_point_is_zero(heisenberg):
    est = estimate_upper(heisenberg, [0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    assert est.value == 0.0 and est.converged and len(est.path.vertices) == 1


def _sound(est, q, alpha, cfg):
    q_hit = est.path.end
    assert est.value >= np.linalg.norm(q_hit - est.path.start) - 1e-12
    assert est.value == pytest.approx(path_length(est.path))
    assert est.defect == pytest.approx(horizontality_defect(est.path, alpha))
    if est.converged:
        assert est.endpoint_gap <= est.tolerance
        assert est.defect <= cfg.defect_tol
        assert est.value >= np.linalg.norm(np.asarray(q) - est.path.start) - est.endpoint_gap


def test_horizontal_segment_squeeze(heisenberg):
    est = estimate_upper(heisenberg, [0, 0, 0], [1, 0, 0], FAST)
    assert est.converged
    assert est.value == pytest.approx(1.0, rel=0.01)
    _sound(est, [1, 0, 0], heisenberg, FAST)


def test_vertical_target_matches_dido(heisenberg):
    est = estimate_upper(heisenberg, [0, 0, 0], [0, 0, 0.01], FAST)
    assert est.converged
    assert est.value == pytest.approx(heisenberg_vertical_exact(0.01), rel=0.03)
    assert est.value >= heisenberg_vertical_exact(0.01) - est.value_tolerance
    _sound(est, [0, 0, 0.01], heisenberg, FAST)


def test_perturbed_vertical_converges(perturbed):
    cfg = OptimizerConfig(restarts=2)
    est = estimate_upper(perturbed, [0, 0, 0], [0, 0, 0.002], cfg)
    assert est.converged
    _sound(est, [0, 0, 0.002], perturbed, cfg)


def test_foliation_vertical_is_unconverged(foliation):
    est = estimate_upper(foliation, [0, 0, 0], [0, 0, 0.01], OptimizerConfig(restarts=2, step_budget=30))
    assert not est.converged and est.status == "unconverged"
    assert est.endpoint_gap == pytest.approx(0.01)
    assert np.all(est.path.vertices[:, 2] == 0.0)


@pytest.mark.parametrize("model", ["heisenberg", "perturbed"])
def test_symmetry(model):
    alpha = build_model(model)[0]
    p, q = np.array([0.1, 0.0, 0.0]), np.array([0.1, 0.0, 0.004])
    cfg = OptimizerConfig(restarts=4)
    a, b = estimate_upper(alpha, p, q, cfg), estimate_upper(alpha, q, p, cfg)
    assert a.converged and b.converged
    assert abs(a.value - b.value) <= 2 * max(a.value_tolerance, b.value_tolerance)
    if model == "heisenberg":
        assert a.value == pytest.approx(b.value, rel=1e-3)


def test_more_restarts_never_increase_value(perturbed):
    values = [estimate_upper(perturbed, [0, 0, 0], [0, 0, 0.003], OptimizerConfig(restarts=r)).value
              for r in (1, 2, 3, 5)]
    assert all(b <= a for a, b in zip(values, values[1:])), values


def test_concatenation_seeding(perturbed):
    p, q, r = np.zeros(3), np.array([0.03, 0.0, 0.002]), np.array([0.03, 0.03, 0.004])
    first = estimate_upper(perturbed, p, q, FAST)
    second = estimate_upper(perturbed, first.path.end, r, FAST)
    seeded = estimate_upper(perturbed, p, r, FAST, seeds=[concatenate(first.path, second.path)])
    assert seeded.converged
    assert seeded.value <= first.value + second.value + seeded.value_tolerance


def test_determinism(heisenberg):
    a = estimate_upper(heisenberg, [0, 0, 0], [0.02, 0.01, 0.003], FAST)
    b = estimate_upper(heisenberg, [0, 0, 0], [0.02, 0.01, 0.003], FAST)
    assert a.to_json() == b.to_json()
    np.testing.assert_array_equal(a.path.vertices, b.path.vertices)


def test_json_record(heisenberg):
    import json

    est = estimate_upper(heisenberg, [0, 0, 0], [0.05, 0, 0], FAST)
    rec = json.loads(est.to_json())
    assert set(rec) >= {"value", "defect", "endpoint_gap", "seed", "config_hash", "status"}
    assert rec["config_hash"] == FAST.config_hash()
    assert OptimizerConfig().config_hash() != FAST.config_hash()


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(segments=1)
    with pytest.raises(ValueError):
        OptimizerConfig(endpoint_tol=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(penalty_schedule=())


def test_probe_heisenberg_dido_window(heisenberg):
    eps = 0.1
    rep = reachability_probe(heisenberg, [0, 0, 0], eps, samples=256, seed=0)
    dido = eps**2 / (4 * math.pi)
    assert 0.5 * dido <= rep.fiber_reach <= (eps * (1 + 1.01 * rep.fiber_tol)) ** 2 / (4 * math.pi)
    assert rep.max_dr < eps
    more = reachability_probe(heisenberg, [0, 0, 0], eps, samples=1024, seed=0)
    assert more.fiber_reach >= rep.fiber_reach


def test_probe_foliation_has_no_vertical_reach(foliation):
    rep = reachability_probe(foliation, [0.2, -0.1, 0.3], 0.1, samples=128, seed=4)
    assert rep.max_dz <= 1e-12


def test_probe_shrinks_with_budget(heisenberg):
    reach = [reachability_probe(heisenberg, [0, 0, 0], e, samples=128, seed=2).max_dr for e in (0.1, 0.05, 0.025)]
    assert reach[0] > reach[1] > reach[2]


def test_probe_point_lengths_below_budget(perturbed):
    rep = reachability_probe(perturbed, [0, 0, 0], 0.05, samples=64, seed=3)
    assert np.all(np.linalg.norm(rep.points, axis=1) < 0.05)
