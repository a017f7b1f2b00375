"""Constants of the lower bound d_H >= C d_R^(1/(1+theta)), vertical scaling
experiments, and the checks on the constants' arithmetic."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import records
from .disks import C_M, DELTA_M, SIGMA, boundary_integral, fill_disk
from .distance import DistanceEstimate, OptimizerConfig, estimate_upper
from .forms import MetricChart, OneForm, kernel_frame, sin_angle
from .paths import Polyline, close_loop, path_length, point_at_arclength


def _core(theta, c_M, K, sin_phi0, alpha_norm) -> float:
    """c_M^theta K ||alpha|| / sin(phi0), the quantity every constant is built from."""
    return c_M**theta * K * alpha_norm / sin_phi0


def _check_inputs(theta, c_M, K, sin_phi0, alpha_norm):
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0,1]")
    if sin_phi0 <= 0.0:
        raise ValueError("sin(phi0) = 0: the curve is not transverse, no positive constant exists")
    if sin_phi0 > 1.0:
        raise ValueError("sin(phi0) must be <= 1")
    if min(c_M, K, alpha_norm) <= 0.0:
        raise ValueError("c_M, K and the norm of alpha must be positive")


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def constant_C(theta: float, c_M: float, K: float, sin_phi0: float, alpha_norm: float) -> float:
    """C = 1 / (2 (c_M^theta K ||alpha|| / sin phi0)^(1/(1+theta)))."""
    _check_inputs(theta, c_M, K, sin_phi0, alpha_norm)
    # log space: extreme exponents at small theta must not under- or overflow
    log_core = theta * math.log(c_M) + math.log(K) + math.log(alpha_norm) - math.log(sin_phi0)
    return 0.5 * _exp(-log_core / (1 + theta))


def rho_third_term(theta, c_M, K, sin_phi0, alpha_norm) -> float:
    """1 / (2^((1+theta)/theta) c_M (K ||alpha|| / sin phi0)^(1/theta))."""
    _check_inputs(theta, c_M, K, sin_phi0, alpha_norm)
    log_den = ((1 + theta) / theta * math.log(2.0) + math.log(c_M)
               + (math.log(K) + math.log(alpha_norm) - math.log(sin_phi0)) / theta)
    return _exp(-log_den)


@dataclass(frozen=True)
class ConstantsBundle:
    theta: float
    c_M: float
    K: float
    sin_phi0: float
    alpha_norm: float
    delta_M: float = DELTA_M
    sigma: float = SIGMA
    eta: float = math.inf
    tau: float = field(init=False)
    rho: float = field(init=False)
    C: float = field(init=False)

    def __post_init__(self):
        _check_inputs(self.theta, self.c_M, self.K, self.sin_phi0, self.alpha_norm)
        if min(self.delta_M, self.sigma, self.eta) <= 0.0:
            raise ValueError("delta_M, sigma and eta must be positive")
        tau = min(self.delta_M, self.sigma)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "rho", min(self.eta, tau / 2, rho_third_term(
            self.theta, self.c_M, self.K, self.sin_phi0, self.alpha_norm)))
        object.__setattr__(self, "C", constant_C(self.theta, self.c_M, self.K, self.sin_phi0,
                                                 self.alpha_norm))

    def inputs(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in
                ("theta", "c_M", "K", "sin_phi0", "alpha_norm", "delta_M", "sigma", "eta")}

    def to_record(self) -> dict[str, object]:
        rec = {f"constants.{k}": v for k, v in self.inputs().items()}
        rec.update({"constants.tau": self.tau, "constants.rho": self.rho, "constants.C": self.C})
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, str] | str) -> "ConstantsBundle":
        if isinstance(rec, str):
            rec = records.loads(rec)
        keys = ("theta", "c_M", "K", "sin_phi0", "alpha_norm", "delta_M", "sigma", "eta")
        return cls(**{k: float(rec[f"constants.{k}"]) for k in keys})


def rho_threshold(b: ConstantsBundle) -> float:
    return min(b.eta, b.tau / 2, rho_third_term(b.theta, b.c_M, b.K, b.sin_phi0, b.alpha_norm))


def curly_brace_check(b: ConstantsBundle, gamma0_length: float) -> float:
    """1 - (c_M^theta K ||alpha|| / sin phi0)^(1/(1+theta)) |gamma0|^(theta/(1+theta)).

    Defined for 0 <= |gamma0| <= rho; the result is then >= 1/2.
    """
    if not 0.0 <= gamma0_length <= b.rho:
        raise ValueError(f"gamma0 length {gamma0_length} outside [0, rho = {b.rho}]")
    if gamma0_length == 0.0:
        return 1.0
    th = b.theta
    log_core = math.log(_core(th, b.c_M, b.K, b.sin_phi0, b.alpha_norm))
    return 1.0 - _exp((log_core + th * math.log(gamma0_length)) / (1 + th))


def curly_brace_sweep(bundles: int = 20, lengths: int = 1000, seed: int = 0) -> float:
    """Smallest curly-brace value over random bundles and lengths uniform in (0, rho)."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(bundles):
        b = random_bundle(rng)
        g = b.rho * rng.uniform(0.0, 1.0, lengths)
        g = g[(g > 0) & (g < b.rho)]
        worst = min(worst, min(curly_brace_check(b, float(x)) for x in g))
    return worst


def random_bundle(rng: np.random.Generator) -> ConstantsBundle:
    logu = lambda lo, hi: float(math.exp(rng.uniform(math.log(lo), math.log(hi))))  # noqa: E731
    return ConstantsBundle(theta=float(rng.uniform(0.05, 0.95)), c_M=logu(0.01, 10), K=logu(0.01, 10),
                           sin_phi0=float(rng.uniform(0.05, 1.0)), alpha_norm=logu(0.1, 10),
                           delta_M=logu(0.01, 2), sigma=logu(0.01, 2), eta=logu(1e-4, 10))


def min_sin_angle(alpha: OneForm, curve: Polyline, samples_per_segment: int = 1) -> float:
    """min of sin(angle to Ker alpha) at evenly spaced interior points of each segment."""
    t = (np.arange(samples_per_segment) + 0.5) / samples_per_segment
    a, d = curve.segment_starts, curve.segment_vectors
    pts = (a[:, None, :] + t[None, :, None] * d[:, None, :]).reshape(-1, 3)
    dirs = np.repeat(d, samples_per_segment, axis=0)
    s = sin_angle(alpha, pts, dirs)
    if np.any(s <= 0.0):
        raise ValueError("curve is not transverse to the distribution (sin angle vanishes)")
    return float(s.min())


def vertical_curve(p, length: float, chart: MetricChart = MetricChart(), segments: int = 64) -> Polyline:
    p = np.asarray(p, dtype=float)
    z = np.linspace(0.0, length, segments + 1)
    return Polyline(p + np.outer(z, [0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class EtaEstimate:
    eta: float
    confirmed_radius: float
    tested: tuple[tuple[float, float, bool], ...]
    procedure: str = ("radii tau/2 * 2^-k scanned upward from k = start_level (downward first if "
                      "that fails); at each radius estimate d_H from p to p + r v for "
                      "v in {+n, -n, e1, e2}; keep the largest radius where every estimate "
                      "converged below tau/2; eta is half of it")


def estimate_eta(alpha: OneForm, p, tau: float, cfg: OptimizerConfig = OptimizerConfig(),
                 start_level: int = 6, max_level: int = 16,
                 chart: MetricChart = MetricChart()) -> EtaEstimate:
    """Empirical uniform-continuity threshold: d_H(p, q) < tau/2 whenever d_R(p, q) < eta."""
    p = np.asarray(p, dtype=float)
    a = alpha(p)
    n = a / np.linalg.norm(a)
    e1, e2 = kernel_frame(alpha, p[None])
    dirs = [n, -n, e1[0], e2[0]]
    tested: list[tuple[float, float, bool]] = []

    def confirm(r: float) -> bool:
        for v in dirs:
            est = estimate_upper(alpha, p, p + r * v, cfg, chart)
            good = est.converged and est.value < tau / 2
            tested.append((r, est.value, good))
            if not good:
                return False
        return True

    k = start_level
    while not confirm(tau / 2 * 2.0**-k):
        k += 1
        if k > max_level:
            raise RuntimeError("no tested radius keeps d_H below tau/2")
    while k > 0 and confirm(tau / 2 * 2.0 ** -(k - 1)):
        k -= 1
    confirmed = tau / 2 * 2.0**-k
    return EtaEstimate(confirmed / 2, confirmed, tuple(tested))


def build_bundle(alpha: OneForm, theta: float, curve: Polyline, K: float, eta: float,
                 c_M: float = C_M, delta_M: float = DELTA_M, sigma: float = SIGMA) -> ConstantsBundle:
    """Bundle with ||alpha|| the certified bound of the normalized form and
    sin(phi0) the minimum along ``curve``."""
    return ConstantsBundle(theta=theta, c_M=c_M, K=K, sin_phi0=min_sin_angle(alpha, curve, 4),
                           alpha_norm=alpha.normalized().norm_upper, delta_M=delta_M, sigma=sigma,
                           eta=eta)


@dataclass
class ScalingResult:
    epsilons: np.ndarray
    d_r: np.ndarray
    dhat: np.ndarray
    converged: np.ndarray
    endpoint_gaps: np.ndarray
    defects: np.ndarray
    lower_bound: np.ndarray
    fitted_slope: float
    intercept: float
    r2: float
    violations: int
    partial: bool
    bundle: ConstantsBundle | None = None
    estimates: list[DistanceEstimate] = field(default_factory=list, repr=False)

    @property
    def flagged(self) -> bool:
        return self.r2 < 0.98

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "d_r", "d_hat", "lower_bound", "violation", "converged",
                    "endpoint_gap", "defect"])
        for i in range(len(self.epsilons)):
            lb = self.lower_bound[i]
            w.writerow([repr(float(self.epsilons[i])), repr(float(self.d_r[i])), repr(float(self.dhat[i])),
                        "" if math.isnan(lb) else repr(float(lb)),
                        int(self.converged[i] and not math.isnan(lb) and self.dhat[i] < lb),
                        int(self.converged[i]), repr(float(self.endpoint_gaps[i])),
                        repr(float(self.defects[i]))])
        return buf.getvalue()

    def summary(self) -> dict[str, object]:
        return {
            "fitted_slope": self.fitted_slope, "intercept": self.intercept, "r2": self.r2,
            "violations": self.violations, "partial": self.partial, "flagged": self.flagged,
            "points": len(self.epsilons),
            "C": self.bundle.C if self.bundle else None,
            "rho": self.bundle.rho if self.bundle else None,
            "bundle": self.bundle.to_record() if self.bundle else None,
        }


def loglog_fit(x, y) -> tuple[float, float, float]:
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def scaling_experiment(alpha: OneForm, theta: float, curve: Polyline, epsilons,
                       cfg: OptimizerConfig = OptimizerConfig(), bundle: ConstantsBundle | None = None,
                       chart: MetricChart = MetricChart()) -> ScalingResult:
    """Estimate d_H from the curve's start to the point at arclength eps, for
    each eps, and fit log d_hat against log d_R.

    With a bundle, every eps must lie below rho and each converged estimate
    is checked against C d_R^(1/(1+theta)).
    """
    eps = np.sort(np.asarray(epsilons, dtype=float))[::-1]
    if len(eps) < 3:
        raise ValueError("scaling experiment needs at least 3 epsilons")
    if np.any(np.diff(eps) == 0):
        raise ValueError("epsilons must be distinct")
    min_sin_angle(alpha, curve)
    if bundle is not None and np.any(eps >= bundle.rho):
        raise ValueError(f"every epsilon must be below rho = {bundle.rho:.6g}")
    p = curve.start
    ests = [estimate_upper(alpha, p, point_at_arclength(curve, e), cfg, chart) for e in eps]
    d_r = np.array([float(chart.distance(p, point_at_arclength(curve, e))) for e in eps])
    dhat = np.array([e.value for e in ests])
    conv = np.array([e.converged for e in ests])
    lower = (bundle.C * d_r ** (1 / (1 + theta)) if bundle is not None
             else np.full(len(eps), math.nan))
    violations = int(np.sum(conv & (dhat < lower))) if bundle is not None else 0
    slope, intercept, r2 = loglog_fit(d_r, dhat)
    return ScalingResult(eps, d_r, dhat, conv, np.array([e.endpoint_gap for e in ests]),
                         np.array([e.defect for e in ests]), lower, slope, intercept, r2,
                         violations, not conv.all(), bundle, ests)


def upper_bound_exploration(result: ScalingResult, theta: float) -> list[dict[str, float]]:
    """d_hat against d_R^(1/(1+theta)) and sqrt(d_R); reported, never asserted."""
    return [{"d_r": float(r), "d_hat": float(d), "ratio_holder": float(d / r ** (1 / (1 + theta))),
             "ratio_sqrt": float(d / math.sqrt(r))} for r, d in zip(result.d_r, result.dhat)]


@dataclass(frozen=True)
class LimitTable:
    thetas: np.ndarray
    values: np.ndarray
    limit: float
    monotone: bool
    finite: bool
    max_slope: float

    @property
    def rel_gap_at_end(self) -> float:
        return abs(self.values[-1] - self.limit) / abs(self.limit)


def c1_limit_check(c_M: float, K: float, alpha_norm: float, sin_phi0: float, thetas=None) -> LimitTable:
    """C(theta) on a grid approaching 1 with the other inputs fixed, against C(1)."""
    thetas = np.asarray(thetas if thetas is not None else np.linspace(0.9, 0.999, 100), dtype=float)
    if np.any(thetas >= 1.0) or np.any(thetas <= 0.0):
        raise ValueError("thetas must lie in (0,1)")
    vals = np.array([constant_C(t, c_M, K, sin_phi0, alpha_norm) for t in thetas])
    diffs = np.diff(vals)
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    slope = float(np.max(np.abs(diffs / np.diff(thetas)))) if len(thetas) > 1 else 0.0
    return LimitTable(thetas, vals, constant_C(1.0, c_M, K, sin_phi0, alpha_norm), monotone,
                      bool(np.all(np.isfinite(vals))), slope)


@dataclass(frozen=True)
class ProofChain:
    """Each link of the chain bounding |gamma0| for one vertical pair."""

    gamma0: float
    gamma1: float
    integral_alpha_gamma: float
    scaled_integral: float
    stokes_bound: float
    filling_bound: float
    area: float
    boundary_length: float

    def links(self) -> dict[str, bool]:
        return {
            "alpha_gamma_le_scaled": self.integral_alpha_gamma <= self.scaled_integral * (1 + 1e-9),
            "scaled_le_stokes": self.scaled_integral <= self.stokes_bound,
            "stokes_le_filling": self.stokes_bound <= self.filling_bound * (1 + 1e-12),
        }


def proof_chain(alpha: OneForm, bundle: ConstantsBundle, gamma0: Polyline, gamma1: Polyline) -> ProofChain:
    """Evaluate the chain on Gamma = gamma0 - gamma1 and its disk filling.

    alpha_gamma is alpha divided by its value on the (constant) unit tangent of gamma0.
    """
    loop = close_loop(gamma0, gamma1)
    disk = fill_disk(loop, delta_M=bundle.delta_M, c_M=bundle.c_M)
    tangent = gamma0.segment_vectors[0] / np.linalg.norm(gamma0.segment_vectors[0])
    unit = alpha.normalized()

    def alpha_gamma(x):
        a = alpha(x)
        return a / np.sum(a * tangent, axis=-1, keepdims=True)

    ag = OneForm(alpha_gamma, alpha.theta, alpha.bounds)
    th = bundle.theta
    bl, area = disk.boundary_length, disk.area
    scaled = boundary_integral(unit, loop) / bundle.sin_phi0
    stokes = bundle.K * bundle.alpha_norm / bundle.sin_phi0 * bl ** (1 - th) * area**th
    filling = bundle.c_M**th * bundle.K * bundle.alpha_norm / bundle.sin_phi0 * bl ** (1 + th)
    return ProofChain(path_length(gamma0), path_length(gamma1), boundary_integral(ag, loop), scaled,
                      stokes, filling, area, bl)


def scaling_report_json(result: ScalingResult) -> str:
    return json.dumps(result.summary(), sort_keys=True, default=float)
