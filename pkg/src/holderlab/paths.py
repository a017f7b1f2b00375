"""Polylines in the universal-cover lift of the chart and horizontal
control integration."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .forms import OneForm, kernel_frame


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered vertices; a closed polyline has an implicit last->first segment.

    A single vertex is the trivial (length zero) path.
    """

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float, copy=True)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 1:
            raise ValueError("vertices must be an (n, 3) array with n >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if len(v) > 1 and np.any(np.linalg.norm(self.segment_vectors, axis=1) == 0.0):
            raise ValueError("zero-length segment")
        if self.closed and len(v) < 2:
            raise ValueError("a closed polyline needs at least two vertices")

    @property
    def segment_starts(self) -> np.ndarray:
        return self.vertices if self.closed else self.vertices[:-1]

    @property
    def segment_ends(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) if self.closed else self.vertices[1:]

    @property
    def segment_vectors(self) -> np.ndarray:
        return self.segment_ends - self.segment_starts

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[0] if self.closed else self.vertices[-1]

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1], self.closed)

    def refined(self) -> "Polyline":
        """Insert every segment midpoint."""
        starts, ends = self.segment_starts, self.segment_ends
        mids = 0.5 * (starts + ends)
        out = np.empty((2 * len(starts), 3))
        out[0::2], out[1::2] = starts, mids
        if not self.closed:
            out = np.vstack([out, self.vertices[-1:]])
        return Polyline(out, self.closed)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "z"])
        w.writerows([repr(float(c)) for c in row] for row in self.vertices)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, closed: bool = False) -> "Polyline":
        rows = list(csv.reader(io.StringIO(text)))
        return cls(np.array([[float(c) for c in r] for r in rows[1:]]), closed)


def concatenate(first: Polyline, second: Polyline) -> Polyline:
    if not np.allclose(first.end, second.start, atol=1e-12):
        raise ValueError("paths do not join")
    return Polyline(np.vstack([first.vertices, second.vertices[1:]]))


def close_loop(outbound: Polyline, inbound: Polyline) -> Polyline:
    """The closed loop ``outbound - inbound`` (both run from p to q)."""
    back = inbound.vertices[::-1]
    if not np.allclose(outbound.end, back[0], atol=1e-12):
        raise ValueError("paths do not share an endpoint")
    v = np.vstack([outbound.vertices, back[1:-1]])
    return Polyline(v, closed=True)


def path_length(p: Polyline) -> float:
    if len(p.vertices) == 1:
        return 0.0
    return float(np.linalg.norm(p.segment_vectors, axis=1).sum())


def point_at_arclength(p: Polyline, s: float) -> np.ndarray:
    if len(p.vertices) == 1:
        return p.start.copy()
    seg = p.segment_vectors
    lens = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    if not 0.0 <= s <= cum[-1] * (1 + 1e-12):
        raise ValueError(f"arclength {s} outside [0, {cum[-1]}]")
    i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
    return p.segment_starts[i] + seg[i] * ((s - cum[i]) / lens[i])


def horizontality_defect(p: Polyline, alpha: OneForm) -> float:
    """Midpoint-rule integral of |alpha_unit(dgamma)| divided by the length."""
    length = path_length(p)
    if length == 0.0:
        return 0.0
    mids = 0.5 * (p.segment_starts + p.segment_ends)
    a = alpha(mids)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    return float(np.abs(np.sum(a * p.segment_vectors, axis=1)).sum() / length)


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """Frame coordinates (u1, u2) per step; the path moves h * (u1 e1 + u2 e2)."""

    controls: np.ndarray
    step: float
    start: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.controls, dtype=float).reshape(-1, 2)
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not np.all(np.isfinite(c)):
            raise ValueError("controls must be finite")
        object.__setattr__(self, "controls", c)
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float).reshape(3))

    @property
    def length(self) -> float:
        return float(self.step * np.linalg.norm(self.controls, axis=1).sum())


def integrate_batch(alpha: OneForm, start, controls: np.ndarray, step: float,
                    keep_path: bool = False):
    """Explicit first-order stepping for a batch of control sequences.

    ``controls`` has shape (B, N, 2). Returns endpoints (B, 3), and with
    ``keep_path`` also the vertices (B, N + 1, 3).
    """
    controls = np.asarray(controls, dtype=float)
    b, n, _ = controls.shape
    x = np.broadcast_to(np.asarray(start, dtype=float), (b, 3)).copy()
    path = np.empty((b, n + 1, 3)) if keep_path else None
    if keep_path:
        path[:, 0] = x
    for k in range(n):
        e1, e2 = kernel_frame(alpha, x)
        x = x + step * (controls[:, k, 0:1] * e1 + controls[:, k, 1:2] * e2)
        if keep_path:
            path[:, k + 1] = x
    return (x, path) if keep_path else x


def integrate_controls(c: ControlSequence, alpha: OneForm) -> Polyline:
    _, path = integrate_batch(alpha, c.start, c.controls[None], c.step, keep_path=True)
    v = path[0]
    moving = np.concatenate([[True], np.linalg.norm(np.diff(v, axis=0), axis=1) > 0.0])
    return Polyline(v[moving])
