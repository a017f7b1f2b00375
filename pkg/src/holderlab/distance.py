"""Upper estimates of the subriemannian distance by derivative-free search
over horizontal controls, plus the Heisenberg vertical oracle and the
reachability probe."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .forms import MetricChart, OneForm, kernel_frame
from .paths import (ControlSequence, Polyline, horizontality_defect, integrate_batch,
                    integrate_controls, path_length)


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings. Tolerances on the endpoint are
    min(endpoint_tol, endpoint_rel_tol * d_R(p, q))."""

    segments: int = 32
    modes: int = 3
    restarts: int = 8
    endpoint_tol: float = 1e-4
    endpoint_rel_tol: float = 1e-2
    defect_tol: float = 0.1
    step_budget: int = 200
    penalty_schedule: tuple[float, ...] = (100.0, 1e3, 1e4, 1e5, 1e6)
    random_directions: int = 4
    jacobian_step: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.segments < 2:
            raise ValueError("segments must be >= 2")
        if self.modes < 0 or self.restarts < 1 or self.step_budget < 1:
            raise ValueError("modes >= 0, restarts >= 1 and step_budget >= 1 required")
        if self.endpoint_tol <= 0 or self.endpoint_rel_tol <= 0 or self.defect_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.penalty_schedule:
            raise ValueError("penalty schedule must be nonempty")

    def config_hash(self) -> str:
        body = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha1(body).hexdigest()[:12]


@dataclass(eq=False)
class DistanceEstimate:
    value: float
    path: Polyline
    defect: float
    endpoint_gap: float
    converged: bool
    restarts: int
    iterations: int
    seed: int
    tolerance: float
    config_hash: str = ""

    @property
    def value_tolerance(self) -> float:
        """Length uncertainty implied by the endpoint tolerance: the radius of
        a Heisenberg-type box of Euclidean size ``tolerance``."""
        return 2.0 * math.sqrt(math.pi * self.tolerance)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "unconverged"

    def to_json(self) -> str:
        return json.dumps({
            "value": self.value, "defect": self.defect, "endpoint_gap": self.endpoint_gap,
            "status": self.status, "restarts": self.restarts, "iterations": self.iterations,
            "seed": self.seed, "tolerance": self.tolerance, "config_hash": self.config_hash,
        }, sort_keys=True)


def heisenberg_vertical_exact(z: float) -> float:
    """Length of the shortest horizontal lift reaching height z: a circle of area |z|."""
    return 2.0 * math.sqrt(math.pi * abs(z))


def fourier_basis(segments: int, modes: int) -> np.ndarray:
    """(segments, 2 * modes + 1) matrix sampling 1, cos(2 pi m t), sin(2 pi m t) at step midpoints."""
    t = (np.arange(segments) + 0.5) / segments
    cols = [np.ones(segments)]
    for m in range(1, modes + 1):
        cols += [np.cos(2 * math.pi * m * t), np.sin(2 * math.pi * m * t)]
    return np.stack(cols, axis=1)


class _Problem:
    """Controls parametrized either per step (modes == 0) or by a truncated
    Fourier series per component; time horizon 1, step 1/N."""

    def __init__(self, alpha: OneForm, p, q, cfg: OptimizerConfig, chart: MetricChart):
        self.alpha, self.cfg = alpha, cfg
        self.p = np.asarray(p, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.n = cfg.segments
        self.h = 1.0 / self.n
        self.basis = fourier_basis(self.n, cfg.modes) if cfg.modes > 0 else np.eye(self.n)
        self.dim = 2 * self.basis.shape[1]
        self.dr = float(np.linalg.norm(self.q - self.p))
        self.tol = min(cfg.endpoint_tol, cfg.endpoint_rel_tol * self.dr)
        self.evaluations = 0

    def controls(self, params: np.ndarray) -> np.ndarray:
        c = params.reshape(params.shape[:-1] + (self.basis.shape[1], 2))
        # stacked matmul keeps each batch row independent of the batch size
        return np.matmul(self.basis, c)

    def params_from_controls(self, u: np.ndarray) -> np.ndarray:
        coef, *_ = np.linalg.lstsq(self.basis, u, rcond=None)
        return coef.reshape(-1)

    def evaluate(self, params: np.ndarray):
        """Lengths and endpoint gaps for a (B, dim) batch."""
        u = self.controls(params)
        ends = integrate_batch(self.alpha, self.p, u, self.h)
        self.evaluations += len(params)
        length = self.h * np.linalg.norm(u, axis=-1).sum(axis=-1)
        gap = np.linalg.norm(ends - self.q, axis=-1)
        return length, gap, ends

    def feedback_chord(self) -> np.ndarray:
        """Controls steering toward q by projecting the remaining chord onto the frame."""
        x = self.p.copy()[None]
        u = np.empty((self.n, 2))
        for k in range(self.n):
            e1, e2 = kernel_frame(self.alpha, x)
            rem = (self.q - x[0]) / ((self.n - k) * self.h)
            u[k] = [e1[0] @ rem, e2[0] @ rem]
            x = x + self.h * (u[k, 0] * e1 + u[k, 1] * e2)
        return u


def _loop_controls(n: int, radius: float, phase: float) -> np.ndarray:
    """One turn of a circle of the given signed radius in frame coordinates."""
    t = (np.arange(n) + 0.5) / n
    ang = 2 * math.pi * t + phase
    speed = 2 * math.pi * abs(radius)
    return speed * np.stack([-np.sin(ang), np.cos(ang)], axis=1) * np.array([1.0, np.sign(radius) or 1.0])


def _normal_at(alpha: OneForm, x) -> np.ndarray:
    a = alpha(np.asarray(x, dtype=float))
    return a / np.linalg.norm(a)


def _ansatz(prob: _Problem, phase: float) -> np.ndarray:
    """Chord controls plus a circular loop whose signed area is tuned by a
    secant search so the normal component of the endpoint error vanishes."""
    chord = prob.feedback_chord()
    base = prob.params_from_controls(chord)
    nrm = _normal_at(prob.alpha, prob.q)
    scale = max(prob.dr, 1e-12)

    def residual(s: float) -> float:
        radius = math.copysign(math.sqrt(abs(s)), s)
        u = chord + _loop_controls(prob.n, radius, phase)
        _, _, end = prob.evaluate(prob.params_from_controls(u)[None])
        return float(nrm @ (end[0] - prob.q))

    r0 = residual(0.0)
    if abs(r0) <= prob.tol:
        return base
    # area of a loop is ~ pi * radius^2, so s ~ -r0 / pi is the first guess
    s0, s1 = 0.0, -r0 / math.pi
    f0, f1 = r0, residual(s1)
    for _ in range(12):
        if abs(f1) <= 0.1 * prob.tol or f1 == f0:
            break
        s0, s1, f0 = s1, s1 - f1 * (s1 - s0) / (f1 - f0), f1
        f1 = residual(s1)
        if not math.isfinite(f1) or abs(s1) > 100 * scale:
            break
    radius = math.copysign(math.sqrt(abs(s1)), s1)
    return prob.params_from_controls(chord + _loop_controls(prob.n, radius, phase))


def _jacobian_pinv(prob: _Problem, x: np.ndarray) -> np.ndarray:
    """Pseudo-inverse (B, dim, 3) of forward-difference endpoint Jacobians."""
    b, dim = x.shape
    # a secant over a mesoscale step; pointwise derivatives of rough frames are useless
    fd = prob.cfg.jacobian_step * np.linalg.norm(x, axis=1, keepdims=True)[:, :, None] / np.sqrt(dim)
    pts = np.concatenate([x[:, None, :], x[:, None, :] + fd * np.eye(dim)[None]], axis=1)
    _, _, ends = prob.evaluate(pts.reshape(-1, dim))
    ends = ends.reshape(b, dim + 1, 3)
    jac = (ends[:, 1:] - ends[:, :1]).transpose(0, 2, 1) / fd.reshape(b, 1, 1)
    return np.linalg.pinv(jac)


def _project(prob: _Problem, pts: np.ndarray, pinv: np.ndarray, sweeps: int):
    """Chord iterations pts <- pts + J^+ (q - end) with a frozen Jacobian."""
    length, gap, ends = prob.evaluate(pts)
    for _ in range(sweeps):
        # rows are independent: a row that meets the tolerance is left alone
        todo = gap > 0.1 * prob.tol
        if not todo.any():
            break
        trial = pts + np.matmul(pinv, (prob.q - ends)[:, :, None])[:, :, 0]
        tl, tg, te = prob.evaluate(trial)
        better = todo & (tg < gap)
        pts = np.where(better[:, None], trial, pts)
        length = np.where(better, tl, length)
        gap = np.where(better, tg, gap)
        ends = np.where(better[:, None], te, ends)
    return pts, length, gap


def _pattern_search(prob: _Problem, starts: np.ndarray, rngs: list[np.random.Generator]):
    """Lockstep compass search with random extra poll directions, one state
    per restart.

    Every trial point is first pulled back toward the endpoint constraint by
    chord iterations with the restart's current finite-difference Jacobian,
    so the search runs along the feasible set. The objective
    length / L0 + w * (gap / d_R)^2 keeps a penalty for residual gaps; w
    moves to the next entry of the schedule whenever a restart stalls
    outside the endpoint tolerance.
    """
    cfg = prob.cfg
    r, dim = starts.shape
    x = starts.copy()
    for _ in range(4):
        pinv = _jacobian_pinv(prob, x)
        x, length, gap = _project(prob, x, pinv, 3)
    l0 = np.maximum(length, prob.dr)
    scale = max(prob.dr, 1e-300)
    stage = np.zeros(r, dtype=int)
    weights = np.asarray(cfg.penalty_schedule, dtype=float)

    def objective(lv, gv, idx):
        return lv / l0[idx] + weights[stage[idx]] * (gv / scale) ** 2

    f = objective(length, gap, np.arange(r))
    step = 0.02 * l0
    step_min = 1e-4 * l0
    active = np.ones(r, dtype=bool)
    iters = np.zeros(r, dtype=int)
    eye = np.eye(dim)

    while active.any():
        idx = np.flatnonzero(active)
        polls = []
        for i in idx:
            rand = rngs[i].standard_normal((cfg.random_directions, dim))
            rand /= np.linalg.norm(rand, axis=1, keepdims=True)
            dirs = np.vstack([eye, -eye, rand, -rand])
            polls.append(x[i] + step[i] * dirs)
        npoll = polls[0].shape[0]
        owner = np.repeat(idx, npoll)
        batch, lv, gv = _project(prob, np.concatenate(polls), pinv[owner], 3)
        fv = objective(lv, gv, owner).reshape(len(idx), npoll)
        best = np.argmin(fv, axis=1)
        moved = []
        for j, i in enumerate(idx):
            iters[i] += 1
            k = best[j]
            if fv[j, k] < f[i] - 1e-3 * (step[i] / l0[i]) ** 2:
                x[i] = batch[j * npoll + k]
                length[i], gap[i], f[i] = lv[j * npoll + k], gv[j * npoll + k], fv[j, k]
                step[i] *= 2.0
                moved.append(i)
            else:
                step[i] *= 0.5
            if step[i] < step_min[i]:
                if gap[i] > prob.tol and stage[i] + 1 < len(weights):
                    stage[i] += 1
                    f[i] = length[i] / l0[i] + weights[stage[i]] * (gap[i] / scale) ** 2
                    step[i] = 0.01 * l0[i]
                else:
                    active[i] = False
            if iters[i] >= cfg.step_budget:
                active[i] = False
        if moved:
            pinv[moved] = _jacobian_pinv(prob, x[moved])
    return x, length, gap, int(iters.sum())


def controls_from_polyline(alpha: OneForm, path: Polyline, segments: int) -> np.ndarray:
    """Resample a path to ``segments`` equal-arclength steps and read off frame
    coordinates of each step (time horizon 1)."""
    from .paths import point_at_arclength

    total = path_length(path)
    pts = np.array([point_at_arclength(path, s) for s in np.linspace(0.0, total, segments + 1)])
    e1, e2 = kernel_frame(alpha, pts[:-1])
    d = np.diff(pts, axis=0) * segments
    return np.stack([np.sum(e1 * d, axis=1), np.sum(e2 * d, axis=1)], axis=1)


def _reanchor(prob: _Problem, path: Polyline) -> Polyline:
    """Re-integrate a path found for the reverse pair from prob.p exactly and
    pull its endpoint back to prob.q."""
    if len(path.vertices) < 2:
        return path
    x = prob.params_from_controls(controls_from_polyline(prob.alpha, path, prob.n))[None]
    for _ in range(3):
        x, _, _ = _project(prob, x, _jacobian_pinv(prob, x), 3)
    return integrate_controls(ControlSequence(prob.controls(x[0]), prob.h, prob.p), prob.alpha)


def estimate_upper(alpha: OneForm, p, q, cfg: OptimizerConfig = OptimizerConfig(),
                   chart: MetricChart = MetricChart(),
                   seeds: list[Polyline] | None = None) -> DistanceEstimate:
    """Shortest horizontal path found from p to q.

    The returned value is the length of an explicit, nearly horizontal
    polyline ending within ``tolerance`` of q, so it bounds d_H(p, q) from
    above up to the reported defect and gap. If no restart meets the
    tolerances the best attempt is returned with ``converged=False``.
    Seed paths that already reach q are kept as candidates.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.array_equal(p, q):
        return DistanceEstimate(0.0, Polyline(p[None]), 0.0, 0.0, True, 0, 0, cfg.seed, 0.0,
                                cfg.config_hash())
    # Restarts alternate between the two orientations of the canonical pair,
    # so estimate(p, q) and estimate(q, p) search the same candidate pool and
    # restart i depends only on i.
    forward = tuple(p) <= tuple(q)
    a, b = (p, q) if forward else (q, p)
    prob = _Problem(alpha, p, q, cfg, chart)
    problems = [_Problem(alpha, a, b, cfg, chart), _Problem(alpha, b, a, cfg, chart)]
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    rngs = [np.random.default_rng(s) for s in streams]
    side = [i % 2 for i in range(cfg.restarts)]

    results: dict[int, np.ndarray] = {}
    iters = 0
    for d, sub in enumerate(problems):
        idx = [i for i in range(cfg.restarts) if side[i] == d]
        if not idx:
            continue
        own = [s if (d == 0) == forward else s.reversed() for s in (seeds or [])]
        seed_params = [sub.params_from_controls(controls_from_polyline(alpha, s, sub.n)) for s in own]
        starts = []
        for i in idx:
            rng = rngs[i]
            phase = 0.0 if i < 2 else float(rng.uniform(0, 2 * math.pi))
            base = _ansatz(sub, phase)
            if i < 2 and seed_params:
                cands = np.vstack([base] + seed_params)
                lv, gv, _ = sub.evaluate(cands)
                base = cands[np.argmin(lv / max(sub.dr, 1e-300) + 10.0 * (gv / max(sub.dr, 1e-300)) ** 2)]
            if i >= 2:
                size = 0.05 * np.linalg.norm(base) / math.sqrt(sub.dim)
                base = base + size * rng.standard_normal(sub.dim)
            starts.append(base)
        x, _, _, it = _pattern_search(sub, np.array(starts), [rngs[i] for i in idx])
        iters += it
        for j, i in enumerate(idx):
            path = integrate_controls(ControlSequence(sub.controls(x[j]), sub.h, sub.p), alpha)
            results[i] = path if (d == 0) == forward else _reanchor(prob, path.reversed())

    candidates = []
    for i in range(cfg.restarts):
        path = results[i]
        candidates.append((path, float(np.linalg.norm(path.end - q))))
    for s in seeds or []:
        candidates.append((s, float(np.linalg.norm(s.end - q))))

    best = None
    for path, g in candidates:
        value = path_length(path)
        defect = horizontality_defect(path, alpha)
        ok = g <= prob.tol and defect <= cfg.defect_tol
        key = (not ok, value if ok else g, value)
        if best is None or key < best[0]:
            best = (key, DistanceEstimate(value, path, defect, g, ok, cfg.restarts, iters, cfg.seed,
                                          prob.tol, cfg.config_hash()))
    return best[1]


@dataclass
class ReachReport:
    eps: float
    max_dz: float
    fiber_reach: float
    max_dr: float
    fiber_tol: float
    points: np.ndarray = field(repr=False)


def reachability_probe(alpha: OneForm, p, eps: float, samples: int = 256, seed: int = 0,
                       segments: int = 64, loop_fraction: float = 0.25, fiber_tol: float = 1e-2,
                       chart: MetricChart = MetricChart()) -> ReachReport:
    """Integrate random horizontal control sequences of length < eps from p.

    ``max_dz`` is the largest change of the z coordinate over all samples;
    ``fiber_reach`` restricts to endpoints whose offset from the normal line
    through p is at most ``fiber_tol * eps``. A share of the samples are
    single circular loops in frame coordinates.
    """
    if eps <= 0 or samples < 1:
        raise ValueError("eps must be positive and samples >= 1")
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    n_loop = int(round(loop_fraction * samples))
    h = 1.0 / segments
    basis = fourier_basis(segments, 4)
    raw = np.einsum("nk,bkj->bnj", basis, rng.standard_normal((samples - n_loop, basis.shape[1], 2)))
    loops = np.array([_loop_controls(segments, rng.choice([-1.0, 1.0]), rng.uniform(0, 2 * math.pi))
                      for _ in range(n_loop)]).reshape(n_loop, segments, 2)
    u = np.concatenate([raw, loops]) if n_loop else raw
    target = eps * (1.0 - 1e-9) * rng.uniform(0.5, 1.0, size=len(u))
    target[len(raw):] = eps * (1.0 - 1e-9)
    length = h * np.linalg.norm(u, axis=-1).sum(axis=-1)
    u *= (target / length)[:, None, None]
    ends = integrate_batch(alpha, p, u, h)
    disp = ends - p
    nrm = _normal_at(alpha, p)
    offset = np.linalg.norm(disp - np.outer(disp @ nrm, nrm), axis=1)
    dz = np.abs(disp[:, 2])
    on_fiber = offset <= fiber_tol * eps
    return ReachReport(
        eps=eps,
        max_dz=float(dz.max()),
        fiber_reach=float(dz[on_fiber].max()) if on_fiber.any() else 0.0,
        max_dr=float(chart.distance(p, ends).max()),
        fiber_tol=fiber_tol,
        points=ends,
    )
