import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab import DiskFamily, Polyline, TriangulatedDisk, boundary_integral, fill_disk, stokes_ratio, stokes_sweep
from holderlab.disks import C_M, estimate_K, sweep_to_csv


def circle(r=1.0, n=128, center=(0.0, 0.0, 0.0)):
    t = 2 * math.pi * np.arange(n) / n
    return Polyline(np.asarray(center) + r * np.stack([np.cos(t), np.sin(t), 0 * t], 1), closed=True)


@pytest.fixture(scope="module")
def unit_disk():
    return fill_disk(circle(), delta_M=10.0)


def test_unit_circle_area(unit_disk):
    assert unit_disk.area == pytest.approx(math.pi, rel=0.01)
    assert unit_disk.area <= unit_disk.boundary_length**2 / (4 * math.pi) * 1.01
    assert unit_disk.euler_characteristic == 1


def test_out_and_back_loop_has_no_area():
    disk = fill_disk(Polyline([[0, 0, 0], [0.1, 0.05, 0.02]], closed=True))
    assert disk.area <= 1e-8


def test_fill_rejects_open_or_long_loops():
    with pytest.raises(ValueError, match="closed"):
        fill_disk(Polyline([[0, 0, 0], [0.1, 0, 0]]))
    with pytest.raises(ValueError, match="delta_M"):
        fill_disk(circle(0.1))


def test_smoothing_only_decreases_area():
    t = 2 * math.pi * np.arange(64) / 64
    wavy = Polyline(np.stack([0.05 * np.cos(t), 0.05 * np.sin(t), 0.02 * np.sin(3 * t)], 1), closed=True)
    raw = fill_disk(wavy, smoothing_iters=0)
    smooth = fill_disk(wavy, smoothing_iters=200)
    assert smooth.area <= raw.area
    np.testing.assert_array_equal(smooth.loop.vertices, wavy.vertices)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_random_loops_satisfy_filling_bounds(seed):
    loop = DiskFamily("mixed").loop(np.random.default_rng(seed))
    disk = fill_disk(loop)
    assert disk.area <= C_M * disk.boundary_length**2
    assert disk.max_offset <= C_M * disk.boundary_length
    assert disk.isoperimetric_ok and disk.neighborhood_ok


def test_off_roundtrip(unit_disk):
    again = TriangulatedDisk.from_off(unit_disk.to_off())
    np.testing.assert_array_equal(again.triangles, unit_disk.triangles)
    np.testing.assert_allclose(again.vertices, unit_disk.vertices)
    assert again.area == pytest.approx(unit_disk.area)


def test_boundary_integrals(heisenberg, foliation, rng):
    assert boundary_integral(heisenberg, circle()) == pytest.approx(-math.pi, rel=1e-3)
    assert boundary_integral(heisenberg, circle().reversed()) == pytest.approx(math.pi, rel=1e-3)
    for _ in range(10):
        loop = Polyline(rng.normal(size=(12, 3)), closed=True)
        assert abs(boundary_integral(foliation, loop)) <= 1e-10


def test_boundary_integral_of_polygon_is_exact_for_linear_coefficients(heisenberg):
    square = Polyline([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], closed=True)
    assert boundary_integral(heisenberg, square) == pytest.approx(-1.0, abs=1e-14)


def test_stokes_ratio_examples(heisenberg, foliation, unit_disk):
    assert stokes_ratio(heisenberg, unit_disk, 0.5, sigma=100.0) == pytest.approx(1 / math.sqrt(2), rel=2e-3)
    assert stokes_ratio(foliation, unit_disk, 0.5, sigma=100.0) == pytest.approx(0.0, abs=1e-12)
    assert stokes_ratio(heisenberg.scaled(3.0), unit_disk, 0.5, sigma=100.0) == pytest.approx(
        3 * stokes_ratio(heisenberg, unit_disk, 0.5, sigma=100.0))
    with pytest.raises(ValueError, match="sigma"):
        stokes_ratio(heisenberg, unit_disk, 0.5)


def test_degenerate_disk_rejected(heisenberg):
    disk = fill_disk(Polyline([[0, 0, 0], [0.1, 0, 0]], closed=True))
    with pytest.raises(ValueError, match="degenerate"):
        stokes_ratio(heisenberg, disk, 0.5)


def test_estimate_K_for_exact_form_is_zero(foliation):
    assert estimate_K(foliation, 0.5, DiskFamily("flat"), trials=20) == pytest.approx(0.0, abs=1e-12)


def test_heisenberg_flat_family_smooth_stokes(heisenberg):
    family = DiskFamily("flat", radius=(0.05, 0.4), sigma=10.0)
    samples = stokes_sweep(heisenberg, 0.5, family, trials=60, seed=2)
    k_hat = estimate_K(heisenberg, 0.5, family, trials=60, seed=2)
    assert all(s.normalized_ratio <= k_hat for s in samples)
    assert max(s.normalized_ratio for s in samples) == k_hat
    # d alpha = -dx^dy has unit comass
    assert max(abs(s.boundary_integral) / s.area for s in samples) <= 1 + 1e-9


def test_sweep_prefix_property(perturbed):
    short = stokes_sweep(perturbed.normalized(), 0.5, DiskFamily(), trials=5, seed=3)
    long = stokes_sweep(perturbed.normalized(), 0.5, DiskFamily(), trials=8, seed=3)
    assert short == long[:5]
    assert sweep_to_csv(short).count("\n") == 6


def test_family_respects_sigma(rng):
    fam = DiskFamily("wavy", radius=(0.2, 0.3), sigma=0.5)
    from holderlab import path_length

    assert all(path_length(fam.loop(rng)) < 0.5 for _ in range(50))
    with pytest.raises(ValueError):
        DiskFamily("round")
