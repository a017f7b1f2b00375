"""Lacunary (Weierstrass-type) scalar fields on the periodic chart and a
sampled Hölder-norm estimator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import records

AXES = np.eye(3)


@dataclass(frozen=True)
class HoelderField:
    """W(x) = amplitude * sum_k lam^(-theta k) cos(2 pi lam^k <d_k, x> / L + phase_k).

    Directions are coordinate axes so that integer ``lam`` gives exact
    L-periodicity in every coordinate.
    """

    theta: float
    lam: float
    depth: int
    phases: tuple[float, ...]
    directions: tuple[tuple[float, float, float], ...]
    amplitude: float = 1.0
    period: float = 1.0
    seed: int | None = None
    analytic_norm_bound: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0,1)")
        if self.lam < 2:
            raise ValueError("lambda must be >= 2")
        if self.depth < 0 or self.amplitude < 0 or self.period <= 0:
            raise ValueError("depth, amplitude must be >= 0 and period > 0")
        if len(self.phases) != self.depth + 1 or len(self.directions) != self.depth + 1:
            raise ValueError("need depth+1 phases and directions")
        object.__setattr__(self, "analytic_norm_bound", self.sup_bound + self.seminorm_bound)

    @property
    def weights(self) -> np.ndarray:
        return self.lam ** (-self.theta * np.arange(self.depth + 1))

    @property
    def sup_bound(self) -> float:
        return float(self.amplitude * self.weights.sum())

    @property
    def seminorm_bound(self) -> float:
        """Certified bound on sup |W(x)-W(y)| / |x-y|^theta over R^3.

        Each term differs by at most min(2, c lam^k |x-y|), c = 2 pi |d| / L.
        Two estimates are combined: the termwise interpolation
        min(2, t) <= 2^(1-theta) t^theta, and the scale-splitting sum
        (Lipschitz below lam^k c|x-y| = 1, sup-norm above).
        """
        if self.amplitude == 0.0:
            return 0.0
        th, lam = self.theta, self.lam
        dnorm = max(np.linalg.norm(d) for d in self.directions)
        c = 2.0 * math.pi * dnorm / self.period
        termwise = (self.depth + 1) * 2.0 ** (1.0 - th) * c**th
        splitting = c**th * (1.0 / (1.0 - lam ** (th - 1.0)) + 2.0 / (1.0 - lam ** (-th)))
        return float(self.amplitude * min(termwise, splitting))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = np.asarray(self.directions)
        freqs = (2.0 * math.pi / self.period) * self.lam ** np.arange(self.depth + 1)
        # elementwise products and row sums rather than BLAS calls, so a
        # point's value does not depend on the size of the batch it sits in
        arg = np.sum(x[..., None, :] * d, axis=-1) * freqs + np.asarray(self.phases)
        return self.amplitude * np.sum(np.cos(arg) * self.weights, axis=-1)

    def to_record(self) -> dict[str, object]:
        if self.seed is None:
            raise ValueError("only seeded fields serialize to a recipe")
        return {
            "theta": self.theta,
            "lambda": self.lam,
            "depth": self.depth,
            "seed": self.seed,
            "amplitude": self.amplitude,
            "period": self.period,
        }

    @classmethod
    def from_record(cls, rec: dict[str, str] | str) -> "HoelderField":
        if isinstance(rec, str):
            rec = records.loads(rec)
        return synth_weierstrass(
            theta=float(rec["theta"]),
            lam=float(rec["lambda"]),
            depth=int(rec["depth"]),
            amplitude=float(rec["amplitude"]),
            seed=int(rec["seed"]),
            period=float(rec.get("period", 1.0)),
        )


def synth_weierstrass(theta: float, lam: float = 4.0, depth: int = 8, amplitude: float = 1.0,
                      seed: int = 0, period: float = 1.0) -> HoelderField:
    """Seeded lacunary field; phases uniform in [0, 2pi), axis directions uniform."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0,1)")
    if lam < 2:
        raise ValueError("lambda must be >= 2")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=depth + 1)
    axes = rng.integers(0, 3, size=depth + 1)
    return HoelderField(
        theta=theta,
        lam=lam,
        depth=depth,
        phases=tuple(float(p) for p in phases),
        directions=tuple(tuple(AXES[a]) for a in axes),
        amplitude=amplitude,
        period=period,
        seed=seed,
    )


def eval_field(f: HoelderField, x) -> np.ndarray:
    return f(x)


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 33
    pair_budget: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if self.pair_budget < 1:
            raise ValueError("pair_budget must be >= 1")


_MAX_GRID_POINTS = 1 << 24
_CHUNK = 1 << 16


def hoelder_norm_estimate(f: Callable[[np.ndarray], np.ndarray], theta: float, domain,
                          grid: GridSpec = GridSpec()) -> float:
    """Lower estimate of ||f||_inf + [f]_theta on the box ``domain = (lo, hi)``.

    Sup-norm is taken over a uniform grid. The seminorm is maximized over
    grid pairs at power-of-two offsets along each axis, all corner pairs, and
    ``pair_budget`` random pairs with log-uniform separation. With grids of
    2^m + 1 points and a fixed seed, refining the grid or enlarging the pair
    budget can only increase the result.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0,1)")
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in domain)
    if lo.shape != hi.shape:
        raise ValueError("domain bounds have mismatched dimension")
    extent = hi - lo
    if np.any(extent <= 0.0):
        raise ValueError("degenerate domain: every axis needs positive extent")
    dim = lo.size
    n = grid.resolution
    if n**dim > _MAX_GRID_POINTS:
        raise ValueError(f"grid of {n}^{dim} points is too large")

    axes = [np.linspace(lo[i], hi[i], n) for i in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    vals = _eval_chunked(f, pts).reshape((n,) * dim)
    sup = float(np.max(np.abs(vals)))

    semi = 0.0
    spacing = extent / (n - 1)
    for ax in range(dim):
        s = 1
        while s < n:
            hi_sl = [slice(None)] * dim
            lo_sl = [slice(None)] * dim
            hi_sl[ax] = slice(s, None)
            lo_sl[ax] = slice(None, n - s)
            diff = np.abs(vals[tuple(hi_sl)] - vals[tuple(lo_sl)])
            semi = max(semi, float(diff.max()) / (s * spacing[ax]) ** theta)
            s *= 2

    corners = lo + extent * np.array(np.meshgrid(*[[0, 1]] * dim, indexing="ij")).reshape(dim, -1).T
    cvals = _eval_chunked(f, corners)
    for i in range(len(corners)):
        for j in range(i + 1, len(corners)):
            dist = np.linalg.norm(corners[i] - corners[j])
            semi = max(semi, abs(cvals[i] - cvals[j]) / dist**theta)

    # rows are drawn whole so a larger budget extends, never reshuffles, the pair set
    rng = np.random.default_rng(grid.seed)
    raw = rng.random((grid.pair_budget, 2 * dim + 1))
    diam = float(np.linalg.norm(extent))
    x = lo + extent * raw[:, :dim]
    u = raw[:, dim:2 * dim] - 0.5
    u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
    r = diam * np.exp(np.log(1e-6) * raw[:, -1])
    y = np.clip(x + r[:, None] * u, lo, hi)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 0.0
    if np.any(keep):
        fx = _eval_chunked(f, x[keep])
        fy = _eval_chunked(f, y[keep])
        semi = max(semi, float(np.max(np.abs(fx - fy) / dist[keep] ** theta)))
    return sup + semi


def _eval_chunked(f, pts: np.ndarray) -> np.ndarray:
    out = np.empty(len(pts))
    for start in range(0, len(pts), _CHUNK):
        chunk = pts[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.broadcast_to(np.asarray(f(chunk), dtype=float), len(chunk))
    return out
