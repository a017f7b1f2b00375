"""Executable acceptance criteria. Each check returns a CriterionResult with
the measured quantities, so the test-suite and the ``verify`` command share
one implementation. Tolerances are fixed module constants."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import (build_bundle, c1_limit_check, curly_brace_sweep, estimate_eta,
                     scaling_experiment, vertical_curve)
from .disks import (C_M, DELTA_M, DiskFamily, boundary_integral, fill_disk, stokes_sweep)
from .distance import (OptimizerConfig, estimate_upper, heisenberg_vertical_exact,
                       reachability_probe)
from .fields import GridSpec, hoelder_norm_estimate, synth_weierstrass
from .forms import build_model
from .paths import Polyline, close_loop

VERTICAL_REL_TOL = 0.03
VERTICAL_TIME_LIMIT = 120.0
SLOPE_TARGET, SLOPE_TOL, SLOPE_R2 = 0.5, 0.05, 0.99
MIN_VERTICAL_PAIRS = 20
STOKES_TRIALS = 1000
SMOOTH_STOKES_LIMIT = 1.005
CIRCLE_STOKES_TOL = 1e-3
CIRCLE_AREA_TOL = 1e-2
CURLY_BUNDLES, CURLY_LENGTHS = 20, 1000
LIMIT_REL_TOL = 1e-2
REACH_FRACTION = 0.5
NORM_TARGET, NORM_REL_TOL = 2.0, 0.02


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    measured: str = ""

    def line(self) -> str:
        tail = f" | {self.measured}" if self.measured else ""
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}{tail}"


def circle(radius: float = 1.0, segments: int = 128, center=(0.0, 0.0, 0.0)) -> Polyline:
    t = 2 * math.pi * np.arange(segments) / segments
    pts = np.asarray(center) + radius * np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=1)
    return Polyline(pts, closed=True)


def check_vertical_distance(heights=(0.02, 0.05, 0.1), cfg: OptimizerConfig = OptimizerConfig()):
    alpha, _ = build_model("heisenberg")
    rows = []
    for z in heights:
        t0 = time.perf_counter()
        est = estimate_upper(alpha, [0, 0, 0], [0, 0, z], cfg)
        elapsed = time.perf_counter() - t0
        exact = heisenberg_vertical_exact(z)
        rows.append({"z": z, "estimate": est.value, "oracle": exact,
                     "rel_error": abs(est.value - exact) / exact, "converged": est.converged,
                     "seconds": elapsed})
    ok = all(r["converged"] and r["rel_error"] <= VERTICAL_REL_TOL and r["seconds"] <= VERTICAL_TIME_LIMIT
             for r in rows)
    return CriterionResult(1, "Heisenberg vertical distance within 3% of 2 sqrt(pi z)", ok, {"rows": rows},
                           f"max rel error {max(r['rel_error'] for r in rows):.2%}, "
                           f"max time {max(r['seconds'] for r in rows):.1f}s")


def check_smooth_scaling(epsilons=(0.1, 0.05, 0.02, 0.01), cfg: OptimizerConfig = OptimizerConfig()):
    alpha, _ = build_model("heisenberg")
    res = scaling_experiment(alpha, 0.5, vertical_curve([0, 0, 0], max(epsilons)), epsilons, cfg)
    ok = (abs(res.fitted_slope - SLOPE_TARGET) <= SLOPE_TOL and res.r2 >= SLOPE_R2 and not res.partial)
    return CriterionResult(2, "smooth vertical log-log slope 0.50 +- 0.05, R^2 >= 0.99", ok,
                           {"slope": res.fitted_slope, "r2": res.r2, "partial": res.partial,
                            "d_hat": res.dhat.tolist()},
                           f"slope {res.fitted_slope:.4f}, R^2 {res.r2:.5f}")


def perturbed_bundle(theta: float = 0.5, trials: int = STOKES_TRIALS, seed: int = 0,
                     cfg: OptimizerConfig = OptimizerConfig()):
    """Constants for the perturbed model along the vertical line through the origin."""
    alpha, model = build_model("perturbed", theta, seed=seed)
    samples = stokes_sweep(alpha.normalized(), theta, DiskFamily(), trials, seed)
    k_hat = max(s.normalized_ratio for s in samples)
    eta = estimate_eta(alpha, [0, 0, 0], min(DELTA_M, DiskFamily().sigma), cfg)
    curve = vertical_curve([0, 0, 0], eta.eta)
    return alpha, build_bundle(alpha, theta, curve, k_hat, eta.eta), samples, eta


def check_main_inequality(pairs: int = MIN_VERTICAL_PAIRS, cfg: OptimizerConfig = OptimizerConfig(),
                       prepared=None):
    alpha, bundle, _, eta = prepared or perturbed_bundle(cfg=cfg)
    eps = np.geomspace(bundle.rho / 20, 0.95 * bundle.rho, pairs)
    curve = vertical_curve([0, 0, 0], bundle.rho)
    res = scaling_experiment(alpha, bundle.theta, curve, eps, cfg, bundle)
    converged = int(res.converged.sum())
    ok = res.violations == 0 and converged >= MIN_VERTICAL_PAIRS and np.all(res.d_r < bundle.rho)
    return CriterionResult(3, "perturbed theta=0.5: zero violations of d_H >= C d_R^(1/(1+theta))", ok,
                           {"violations": res.violations, "converged_pairs": converged,
                            "C": bundle.C, "rho": bundle.rho, "eta": eta.eta, "K": bundle.K,
                            "min_margin": float(np.min(res.dhat / res.lower_bound)),
                            "bundle": bundle.to_record(), "csv": res.to_csv()},
                           f"{res.violations} violations over {converged} converged pairs, C {bundle.C:.4g}, "
                           f"rho {bundle.rho:.4g}, min d_hat/bound {float(np.min(res.dhat / res.lower_bound)):.3f}")


def check_holder_stokes(trials: int = STOKES_TRIALS, prepared=None):
    if prepared is not None:
        samples = prepared[2]
    else:
        alpha, _ = build_model("perturbed", 0.5)
        samples = stokes_sweep(alpha.normalized(), 0.5, DiskFamily(), trials, 0)
    ratios = np.array([s.normalized_ratio for s in samples])
    k_hat = float(ratios.max())
    heis, _ = build_model("heisenberg")
    smooth = stokes_sweep(heis, 0.5, DiskFamily(), trials, 1)
    smooth_ratio = max(abs(s.boundary_integral) / s.area for s in smooth)
    ok = (len(samples) >= STOKES_TRIALS and np.all(np.isfinite(ratios)) and math.isfinite(k_hat)
          and len(smooth) >= STOKES_TRIALS and smooth_ratio <= SMOOTH_STOKES_LIMIT)
    return CriterionResult(4, "Hoelder Stokes ratio bounded by finite K_hat; smooth |int a|/|D| <= 1.005",
                           ok, {"K_hat": k_hat, "disks": len(samples), "smooth_max": smooth_ratio},
                           f"K_hat {k_hat:.4g} over {len(samples)} disks, smooth max {smooth_ratio:.5f}")


def check_analytic_stokes():
    alpha, _ = build_model("heisenberg")
    val = boundary_integral(alpha, circle())
    rev = boundary_integral(alpha, circle().reversed())
    ok = abs(val + math.pi) <= CIRCLE_STOKES_TOL * math.pi and abs(rev - math.pi) <= CIRCLE_STOKES_TOL * math.pi
    return CriterionResult(5, "Heisenberg unit-circle boundary integral = -pi +- 0.1%", ok,
                           {"integral": val, "reversed": rev},
                           f"integral {val:.6f}, reversed {rev:.6f}")


def loop_corpus(seed: int = 0) -> list[Polyline]:
    """Circles, ellipses, random flat and wavy loops, a degenerate loop, and
    vertical-plus-horizontal loops from Heisenberg distance estimates."""
    corpus = [circle(r, 64, c) for r, c in [(0.01, (0, 0, 0)), (0.05, (0.1, -0.2, 0.3)), (0.07, (0, 0, 0))]]
    t = 2 * math.pi * np.arange(64) / 64
    corpus.append(Polyline(np.stack([0.07 * np.cos(t), 0.02 * np.sin(t), 0.01 * np.sin(2 * t)], 1), True))
    corpus.append(Polyline([[0, 0, 0], [0.1, 0.05, 0.0]], closed=True))
    fam = DiskFamily()
    corpus += [fam.loop(np.random.default_rng([seed, 10_000 + i])) for i in range(200)]
    heis, _ = build_model("heisenberg")
    cfg = OptimizerConfig(restarts=2)
    for z in (0.001, 0.003):
        est = estimate_upper(heis, [0, 0, 0], [0, 0, z], cfg)
        g0 = Polyline([[0, 0, 0], [0, 0, z]])
        g1 = Polyline(np.vstack([est.path.vertices[:-1], [[0, 0, z]]]))
        corpus.append(close_loop(g0, g1))
    return corpus


def check_isoperimetric(seed: int = 0):
    rows = []
    for loop in loop_corpus(seed):
        disk = fill_disk(loop)
        rows.append((disk.boundary_length, disk.area, disk.max_offset, disk.isoperimetric_ok,
                     disk.neighborhood_ok))
    unit = fill_disk(circle(), delta_M=10.0)
    area_err = abs(unit.area - math.pi) / math.pi
    ok = all(r[3] and r[4] for r in rows) and area_err <= CIRCLE_AREA_TOL
    worst_area = max(r[1] / r[0] ** 2 for r in rows)
    worst_offset = max(r[2] / r[0] for r in rows)
    return CriterionResult(6, "filling: |D| <= c_M |G|^2 and within c_M |G| of G; circle area pi +- 1%", ok,
                           {"loops": len(rows), "max_area_ratio": worst_area, "max_offset_ratio": worst_offset,
                            "c_M": C_M, "circle_area_rel_error": area_err},
                           f"{len(rows)} loops, max |D|/|G|^2 {worst_area:.4f}, max offset/|G| {worst_offset:.4f} "
                           f"(c_M {C_M:.4f}), circle area error {area_err:.3%}")


def check_curly_braces(seed: int = 0):
    worst = curly_brace_sweep(CURLY_BUNDLES, CURLY_LENGTHS, seed)
    return CriterionResult(7, "curly-brace factor >= 1/2 on 20 bundles x 1000 lengths", worst >= 0.5,
                           {"min_value": worst}, f"min {worst:.7f}")


def check_c1_limit():
    tables = {
        "c_M=1/(4pi)": c1_limit_check(1 / (4 * math.pi), 1.0, 1.0, 1.0),
        "c_M=2,K=3,norm=1.5,sin=0.8": c1_limit_check(2.0, 3.0, 1.5, 0.8),
    }
    ok = all(t.monotone and t.finite and t.rel_gap_at_end <= LIMIT_REL_TOL for t in tables.values())
    return CriterionResult(8, "C(theta) monotone on [0.9, 0.999], within 1% of C(1) at 0.999", ok,
                           {k: {"rel_gap": t.rel_gap_at_end, "limit": t.limit, "monotone": t.monotone}
                            for k, t in tables.items()},
                           "rel gaps " + ", ".join(f"{t.rel_gap_at_end:.3%}" for t in tables.values()))


def check_nowhere_integrability(eps_values=(0.1, 0.05, 0.025), plateau_eps=(0.04, 0.02, 0.01),
                                cfg: OptimizerConfig = OptimizerConfig()):
    heis, _ = build_model("heisenberg")
    fol, _ = build_model("foliation")
    rows = []
    ok = True
    for eps in eps_values:
        h = reachability_probe(heis, [0, 0, 0], eps, samples=512, seed=1)
        f = reachability_probe(fol, [0, 0, 0], eps, samples=512, seed=1)
        dido = eps**2 / (4 * math.pi)
        ceiling = (eps * (1 + 1.01 * h.fiber_tol)) ** 2 / (4 * math.pi)
        rows.append({"eps": eps, "heis_fiber_reach": h.fiber_reach, "dido": dido,
                     "foliation_max_dz": f.max_dz, "heis_max_dr": h.max_dr})
        ok &= REACH_FRACTION * dido <= h.fiber_reach <= ceiling and f.max_dz <= 1e-12
    shrinking = all(a["heis_max_dr"] > b["heis_max_dr"] for a, b in zip(rows, rows[1:]))
    plateau = []
    for eps in plateau_eps:
        est = estimate_upper(fol, [0, 0, 0], [0, 0, eps], cfg)
        plateau.append({"eps": eps, "converged": est.converged, "endpoint_gap": est.endpoint_gap})
    unreachable = all(not p["converged"] and p["endpoint_gap"] >= (1 - 1e-9) * p["eps"] for p in plateau)
    ok = bool(ok and shrinking and unreachable)
    return CriterionResult(9, "Heisenberg reaches >= 50% of eps^2/(4 pi) vertically; foliation reaches nothing",
                           ok, {"probe": rows, "foliation_vertical": plateau, "shrinking": shrinking},
                           "reach/dido " + ", ".join(f"{r['heis_fiber_reach'] / r['dido']:.3f}" for r in rows)
                           + f", foliation max dz {max(r['foliation_max_dz'] for r in rows):.1e}, "
                           f"foliation vertical converged {sum(p['converged'] for p in plateau)}/{len(plateau)}")


def check_norm_estimator():
    f = lambda x: np.abs(x[:, 0]) ** 0.5  # noqa: E731
    est = hoelder_norm_estimate(f, 0.5, ([-1.0], [1.0]), GridSpec(1025, 20_000, 0))
    ladder = [hoelder_norm_estimate(f, 0.5, ([-1.0], [1.0]), GridSpec(2**m + 1, 2000, 0)) for m in range(3, 10)]
    monotone = all(a <= b for a, b in zip(ladder, ladder[1:]))
    below = []
    for seed in range(3):
        field_ = synth_weierstrass(0.3, 2.0, 12, 1.0, seed)
        line = lambda t, fld=field_: fld(np.stack([t[:, 0], 0.3 * np.ones(len(t)), 0.7 * np.ones(len(t))], 1))  # noqa: E731
        for res in (16, 64, 256, 512):
            below.append(hoelder_norm_estimate(line, 0.3, ([0.0], [1.0]), GridSpec(res, 5000, seed))
                         <= field_.analytic_norm_bound)
        for res in (16, 32):
            below.append(hoelder_norm_estimate(field_, 0.3, ([-0.5] * 3, [0.5] * 3), GridSpec(res, 5000, seed))
                         <= field_.analytic_norm_bound)
    ok = abs(est - NORM_TARGET) <= NORM_REL_TOL * NORM_TARGET and monotone and all(below)
    return CriterionResult(10, "norm estimator: |x|^0.5 -> 2.0 +- 2%, monotone, below analytic bound", ok,
                           {"estimate": est, "ladder": ladder, "below_bound": all(below)},
                           f"estimate {est:.5f}, ladder monotone {monotone}, {sum(below)}/{len(below)} below bound")


def run_all(cfg: OptimizerConfig = OptimizerConfig()) -> list[CriterionResult]:
    prepared = perturbed_bundle(cfg=cfg)
    return [
        check_vertical_distance(cfg=cfg),
        check_smooth_scaling(cfg=cfg),
        check_main_inequality(cfg=cfg, prepared=prepared),
        check_holder_stokes(prepared=prepared),
        check_analytic_stokes(),
        check_isoperimetric(),
        check_curly_braces(),
        check_c1_limit(),
        check_nowhere_integrability(cfg=cfg),
        check_norm_estimator(),
    ]
