"""Disk fillings of closed loops, boundary integrals of 1-forms, and the
two Stokes-type ratios."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .forms import OneForm
from .paths import Polyline, path_length

DELTA_M = 0.5
SIGMA = 0.5
C_M = 1.0 / (2.0 * math.pi)

_GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class TriangulatedDisk:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    c_M: float = C_M
    smoothing_steps: int = 0

    @property
    def loop(self) -> Polyline:
        return Polyline(self.vertices[self.boundary], closed=True)

    @property
    def area(self) -> float:
        return float(_triangle_areas(self.vertices, self.triangles).sum())

    @property
    def boundary_length(self) -> float:
        return path_length(self.loop)

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(_edges(self.triangles)) + len(self.triangles)

    @property
    def max_offset(self) -> float:
        """Largest distance from a vertex or triangle centroid to the loop."""
        cents = self.vertices[self.triangles].mean(axis=1)
        return float(_distance_to_loop(np.vstack([self.vertices, cents]), self.loop).max())

    @property
    def isoperimetric_ok(self) -> bool:
        return self.area <= self.c_M * self.boundary_length**2

    @property
    def neighborhood_ok(self) -> bool:
        return self.max_offset <= self.c_M * self.boundary_length

    def to_off(self) -> str:
        lines = ["OFF", f"{len(self.vertices)} {len(self.triangles)} 0"]
        lines += [" ".join(repr(float(c)) for c in v) for v in self.vertices]
        lines += ["3 " + " ".join(str(int(i)) for i in t) for t in self.triangles]
        lines.append("# boundary " + " ".join(str(int(i)) for i in self.boundary))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_off(cls, text: str, c_M: float = C_M) -> "TriangulatedDisk":
        rows = [r for r in text.splitlines() if r.strip()]
        if rows[0].strip() != "OFF":
            raise ValueError("not an OFF file")
        nv, nt, _ = (int(v) for v in rows[1].split())
        verts = np.array([[float(c) for c in r.split()] for r in rows[2:2 + nv]])
        tris = np.array([[int(c) for c in r.split()[1:]] for r in rows[2 + nv:2 + nv + nt]])
        bnd = [r for r in rows if r.startswith("# boundary")]
        if not bnd:
            raise ValueError("OFF file carries no boundary line")
        boundary = np.array([int(c) for c in bnd[0].split()[2:]])
        return cls(verts, tris, boundary, c_M)


def _triangle_areas(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _edges(t: np.ndarray) -> np.ndarray:
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _distance_to_loop(pts: np.ndarray, loop: Polyline) -> np.ndarray:
    a, d = loop.segment_starts, loop.segment_vectors
    rel = pts[:, None, :] - a[None]
    dd = np.maximum(np.sum(d * d, axis=1), 1e-300)
    s = np.clip(np.sum(rel * d[None], axis=2) / dd, 0.0, 1.0)
    return np.linalg.norm(rel - s[..., None] * d[None], axis=2).min(axis=1)


def fill_disk(gamma: Polyline, smoothing_iters: int = 200, rings: int = 6,
              delta_M: float = DELTA_M, c_M: float = C_M) -> TriangulatedDisk:
    """Fill a closed loop: cone over the vertex centroid subdivided into
    ``rings`` concentric rings, then uniform Laplacian smoothing of interior
    vertices, keeping only steps that decrease the total area.
    """
    if not gamma.closed:
        raise ValueError("fill_disk needs a closed polyline")
    length = path_length(gamma)
    if length >= delta_M:
        raise ValueError(f"loop length {length:.4g} is not below delta_M = {delta_M:.4g}: "
                         "filling is only guaranteed for cycles of volume less than delta_M")
    b = gamma.vertices
    n = len(b)
    c = b.mean(axis=0)
    frac = np.arange(1, rings + 1) / rings
    verts = np.vstack([c[None], (c + frac[:, None, None] * (b - c)[None]).reshape(-1, 3)])

    def vid(j, k):
        return 1 + (j - 1) * n + (k % n)

    k = np.arange(n)
    tris = [np.stack([np.zeros(n, dtype=int), vid(1, k), vid(1, k + 1)], axis=1)]
    for j in range(1, rings):
        tris.append(np.stack([vid(j, k), vid(j + 1, k), vid(j + 1, k + 1)], axis=1))
        tris.append(np.stack([vid(j, k), vid(j + 1, k + 1), vid(j, k + 1)], axis=1))
    tris = np.concatenate(tris)
    boundary = vid(rings, k)
    interior = np.ones(len(verts), dtype=bool)
    interior[boundary] = False

    e = _edges(tris)
    adj = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                            shape=(len(verts),) * 2).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    area = _triangle_areas(verts, tris).sum()
    lam, steps = 0.5, 0
    for _ in range(smoothing_iters):
        avg = adj @ verts / deg[:, None]
        trial = verts.copy()
        trial[interior] += lam * (avg[interior] - verts[interior])
        new_area = _triangle_areas(trial, tris).sum()
        if new_area < area * (1.0 - 1e-12):
            verts, area, steps = trial, new_area, steps + 1
        else:
            lam *= 0.5
            if lam < 1e-3:
                break
    return TriangulatedDisk(verts, tris, boundary, c_M, steps)


def boundary_integral(alpha: OneForm, gamma: Polyline) -> float:
    """Two-point Gauss rule on each segment of alpha(dgamma)."""
    a, d = gamma.segment_starts, gamma.segment_vectors
    total = 0.0
    for t in _GAUSS:
        total += 0.5 * np.sum(alpha(a + t * d) * d)
    return float(total)


def stokes_ratio(alpha: OneForm, disk: TriangulatedDisk, theta: float,
                 sigma: float = SIGMA) -> float:
    """|int_{dD} alpha| / (|dD|^(1-theta) |D|^theta)."""
    bl, area = disk.boundary_length, disk.area
    if bl <= 0.0 or area <= 0.0:
        raise ValueError("degenerate disk: zero area or boundary length")
    loop = disk.loop
    diam = float(np.max(np.linalg.norm(loop.vertices[:, None] - loop.vertices[None], axis=2)))
    if max(diam, bl) >= sigma:
        raise ValueError(f"disk boundary too large for sigma = {sigma}")
    return abs(boundary_integral(alpha, loop)) / (bl ** (1.0 - theta) * area**theta)


@dataclass(frozen=True)
class DiskFamily:
    """Random closed loops: ``flat`` (planar ellipses in random planes) or
    ``wavy`` (radially and normally modulated ellipses)."""

    kind: str = "mixed"
    radius: tuple[float, float] = (0.01, 0.07)
    center_box: float = 0.25
    segments: int = 48
    sigma: float = SIGMA

    def __post_init__(self):
        if self.kind not in ("flat", "wavy", "mixed"):
            raise ValueError(f"unknown disk family {self.kind!r}")

    def loop(self, rng: np.random.Generator) -> Polyline:
        kind = self.kind
        if kind == "mixed":
            kind = "flat" if rng.random() < 0.5 else "wavy"
        center = rng.uniform(-self.center_box, self.center_box, 3)
        normal = rng.standard_normal(3)
        normal /= np.linalg.norm(normal)
        u = np.cross(normal, rng.standard_normal(3))
        u /= np.linalg.norm(u)
        v = np.cross(normal, u)
        r = rng.uniform(*self.radius)
        aspect = rng.uniform(0.5, 1.0)
        t = 2 * math.pi * np.arange(self.segments) / self.segments
        rad = np.ones_like(t)
        lift = np.zeros_like(t)
        if kind == "wavy":
            m1, m2 = rng.integers(2, 5, size=2)
            rad = 1.0 + rng.uniform(0, 0.25) * np.sin(m1 * t + rng.uniform(0, 2 * math.pi))
            lift = rng.uniform(0, 0.3) * np.sin(m2 * t + rng.uniform(0, 2 * math.pi))
        pts = center + r * (rad * np.cos(t))[:, None] * u + r * aspect * (rad * np.sin(t))[:, None] * v \
            + r * lift[:, None] * normal
        loop = Polyline(pts, closed=True)
        length = path_length(loop)
        if length >= 0.99 * self.sigma:
            loop = Polyline(center + (pts - center) * (0.99 * self.sigma / length), closed=True)
        return loop


@dataclass(frozen=True)
class StokesSample:
    boundary_integral: float
    boundary_length: float
    area: float
    ratio: float
    normalized_ratio: float


def stokes_sweep(alpha: OneForm, theta: float, family: DiskFamily = DiskFamily(),
                 trials: int = 1000, seed: int = 0, smoothing_iters: int = 200) -> list[StokesSample]:
    """Trial i depends only on (seed, i), so a longer sweep extends a shorter one."""
    out = []
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        disk = fill_disk(family.loop(rng), smoothing_iters, delta_M=max(DELTA_M, family.sigma))
        loop = disk.loop
        integral = boundary_integral(alpha, loop)
        ratio = stokes_ratio(alpha, disk, theta, family.sigma)
        out.append(StokesSample(integral, disk.boundary_length, disk.area, ratio,
                                ratio / alpha.norm_upper))
    return out


def estimate_K(alpha: OneForm, theta: float, family: DiskFamily = DiskFamily(),
               trials: int = 1000, seed: int = 0) -> float:
    """Empirical sup of stokes_ratio / ||alpha||_upper over a random disk family."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return max(s.normalized_ratio for s in stokes_sweep(alpha, theta, family, trials, seed))


def sweep_to_csv(samples: list[StokesSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["boundary_integral", "boundary_length", "area", "ratio", "normalized_ratio"])
    for s in samples:
        w.writerow([repr(s.boundary_integral), repr(s.boundary_length), repr(s.area), repr(s.ratio),
                    repr(s.normalized_ratio)])
    return buf.getvalue()
