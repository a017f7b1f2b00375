"""Nowhere-vanishing 1-forms on the periodic chart, their kernel planes,
and the three distribution models (heisenberg, perturbed, foliation)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import records
from .fields import HoelderField, synth_weierstrass

MODEL_KINDS = ("heisenberg", "perturbed", "foliation")
DEFAULT_PERTURBATION = 0.05


@dataclass(frozen=True)
class MetricChart:
    """Flat 3-torus of side ``period``; the chart box is [-L/2, L/2]^3."""

    period: float = 1.0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        half = np.full(3, self.period / 2)
        return -half, half

    @property
    def diameter(self) -> float:
        return math.sqrt(3.0) * self.period

    def distance(self, p, q) -> np.ndarray:
        d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        d -= self.period * np.round(d / self.period)
        return np.linalg.norm(d, axis=-1)


@dataclass(frozen=True)
class CoefficientBounds:
    """Certified sup and C^theta-seminorm bounds of each coefficient on the
    chart box, plus a positive lower bound on |a|."""

    sup: tuple[float, float, float]
    semi: tuple[float, float, float]
    lower: float

    @property
    def norm(self) -> float:
        return max(s + h for s, h in zip(self.sup, self.semi))

    def normalized(self) -> "CoefficientBounds":
        # a_i/|a|: product rule with [1/|a|] <= [|a|]/m^2 and [|a|] <= |([a_j])_j|
        m = self.lower
        semi_abs = math.sqrt(sum(h * h for h in self.semi))
        sup = tuple(min(1.0, s / m) for s in self.sup)
        semi = tuple(s * semi_abs / m**2 + h / m for s, h in zip(self.sup, self.semi))
        return CoefficientBounds(sup=sup, semi=semi, lower=1.0)


@dataclass(frozen=True)
class OneForm:
    """alpha = a1 dx + a2 dy + a3 dz, with ``coefficients`` mapping points of
    shape (..., 3) to coefficient vectors of shape (..., 3)."""

    coefficients: Callable[[np.ndarray], np.ndarray]
    theta: float
    bounds: CoefficientBounds
    name: str = ""
    normalized_form: bool = False

    @property
    def norm_upper(self) -> float:
        return self.bounds.norm

    def __call__(self, x) -> np.ndarray:
        return self.coefficients(np.asarray(x, dtype=float))

    def a(self, i: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda x: self(x)[..., i]

    def normalized(self) -> "OneForm":
        """alpha / |alpha|_g, i.e. the form with alpha(X) = 1 on the unit normal X."""
        if self.normalized_form:
            return self
        coeffs = self.coefficients

        def unit(x):
            a = coeffs(x)
            return a / np.linalg.norm(a, axis=-1, keepdims=True)

        return OneForm(unit, self.theta, self.bounds.normalized(), self.name + "/unit", True)

    def scaled(self, s: float) -> "OneForm":
        coeffs = self.coefficients
        b = self.bounds
        bounds = CoefficientBounds(tuple(abs(s) * v for v in b.sup), tuple(abs(s) * v for v in b.semi),
                                   abs(s) * b.lower)
        return OneForm(lambda x: s * coeffs(x), self.theta, bounds, f"{s}*{self.name}")


@dataclass(frozen=True)
class DistributionModel:
    kind: str
    theta: float
    amplitude: float = 0.0
    seed: int = 0
    perturbation: tuple[HoelderField, HoelderField] | None = field(default=None, compare=False)
    description: str = ""

    def to_record(self) -> dict[str, object]:
        return {"model.kind": self.kind, "model.theta": self.theta,
                "model.amplitude": self.amplitude, "model.seed": self.seed}


def eval_form(alpha: OneForm, x, v) -> np.ndarray:
    return np.sum(alpha(x) * np.asarray(v, dtype=float), axis=-1)


def dual_norm(alpha: OneForm, x) -> np.ndarray:
    return np.linalg.norm(alpha(x), axis=-1)


def kernel_frame(alpha: OneForm, x) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis (e1, e2) of Ker alpha at each point.

    Drops the coordinate axis most aligned with the normal (lowest index on
    ties), Gram-Schmidts the other two in index order, and orients e2 so
    that (e1, e2, normal) is right-handed.
    """
    a = alpha(x)
    n = a / np.linalg.norm(a, axis=-1, keepdims=True)
    drop = np.argmax(np.abs(n), axis=-1)
    first = np.where(drop == 0, 1, 0)
    second = np.where(drop == 2, 1, 2)
    eye = np.eye(3)
    b1, b2 = eye[first], eye[second]
    e1 = b1 - np.sum(b1 * n, axis=-1, keepdims=True) * n
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = b2 - np.sum(b2 * n, axis=-1, keepdims=True) * n - np.sum(b2 * e1, axis=-1, keepdims=True) * e1
    e2 /= np.linalg.norm(e2, axis=-1, keepdims=True)
    orient = np.sign(np.sum(np.cross(e1, e2) * n, axis=-1, keepdims=True))
    return e1, e2 * orient


def sin_angle(alpha: OneForm, x, v) -> np.ndarray:
    """sin of the angle between v and Ker alpha."""
    v = np.asarray(v, dtype=float)
    vn = np.linalg.norm(v, axis=-1)
    if np.any(vn == 0.0):
        raise ValueError("sin_angle needs a nonzero vector")
    a = alpha(x)
    val = np.abs(np.sum(a * v, axis=-1)) / (np.linalg.norm(a, axis=-1) * vn)
    return np.minimum(val, 1.0)


def _linear_bounds(chart: MetricChart, theta: float) -> tuple[float, float]:
    """sup and C^theta seminorm of x/2 on the chart box."""
    return chart.period / 4, 0.5 * chart.diameter ** (1.0 - theta)


def build_model(kind: str, theta: float = 0.5, amplitude: float = DEFAULT_PERTURBATION,
                seed: int = 0, chart: MetricChart = MetricChart(), lam: float = 4.0,
                depth: int = 8) -> tuple[OneForm, DistributionModel]:
    """Construct alpha for one of the three models.

    heisenberg: dz - (x dy - y dx)/2.
    perturbed:  dz - ((x + eps P) dy - (y + eps Q) dx)/2 with P, Q lacunary C^theta fields.
    foliation:  dz.
    Norm bounds are valid on the chart box (the polynomial parts are not periodic).
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0,1)")
    if amplitude < 0:
        raise ValueError("perturbation amplitude must be >= 0")

    if kind == "foliation":
        def coeffs(x):
            out = np.zeros(x.shape)
            out[..., 2] = 1.0
            return out

        bounds = CoefficientBounds((0.0, 0.0, 1.0), (0.0, 0.0, 0.0), 1.0)
        model = DistributionModel(kind, theta, 0.0, seed, description="alpha = dz (integrable)")
        return OneForm(coeffs, theta, bounds, kind), model

    lin_sup, lin_semi = _linear_bounds(chart, theta)
    if kind == "heisenberg" or amplitude == 0.0:
        def coeffs(x):
            return np.stack([x[..., 1] / 2, -x[..., 0] / 2, np.ones(x.shape[:-1])], axis=-1)

        bounds = CoefficientBounds((lin_sup, lin_sup, 1.0), (lin_semi, lin_semi, 0.0), 1.0)
        model = DistributionModel(kind, theta, amplitude, seed,
                                  description="alpha = dz - (x dy - y dx)/2")
        return OneForm(coeffs, theta, bounds, kind), model

    P = synth_weierstrass(theta, lam, depth, 1.0, seed=seed, period=chart.period)
    Q = synth_weierstrass(theta, lam, depth, 1.0, seed=seed + 1, period=chart.period)
    eps = amplitude

    def coeffs(x):
        return np.stack([(x[..., 1] + eps * Q(x)) / 2, -(x[..., 0] + eps * P(x)) / 2,
                         np.ones(x.shape[:-1])], axis=-1)

    s1 = lin_sup + eps * Q.sup_bound / 2
    s2 = lin_sup + eps * P.sup_bound / 2
    h1 = lin_semi + eps * Q.seminorm_bound / 2
    h2 = lin_semi + eps * P.seminorm_bound / 2
    bounds = CoefficientBounds((s1, s2, 1.0), (h1, h2, 0.0), 1.0)
    model = DistributionModel(kind, theta, eps, seed, (P, Q),
                              description=f"heisenberg + {eps} * C^{theta} perturbation")
    return OneForm(coeffs, theta, bounds, kind), model


def model_from_record(rec: dict[str, str], chart: MetricChart = MetricChart()):
    return build_model(rec["model.kind"], float(rec.get("model.theta", 0.5)),
                       float(rec.get("model.amplitude", DEFAULT_PERTURBATION)),
                       int(rec.get("model.seed", 0)), chart)


def model_to_text(model: DistributionModel) -> str:
    return records.dumps(model.to_record())
