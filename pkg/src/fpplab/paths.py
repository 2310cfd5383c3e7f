"""Lattice discretization of piecewise-linear curves and highway insertion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import InvalidInput, WeightConfiguration


@dataclass
class DiscretizedPath:
    alpha: np.ndarray        # (p + 1, d) integer lattice path
    jump_times: np.ndarray   # (p,) times of the jumps, nondecreasing
    scale: float
    shift: np.ndarray
    curve: np.ndarray
    times: np.ndarray

    @property
    def p(self):
        return len(self.alpha) - 1

    def index_at(self, t):
        """j(t): number of jumps at or before t (right-continuous step function)."""
        return np.searchsorted(self.jump_times, np.asarray(t, dtype=float), side="right")

    def curve_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.curve[:, i]) for i in range(self.curve.shape[1])], axis=-1)

    def to_csv(self):
        d = self.alpha.shape[1]
        cols = ["t", "j"] + [f"alpha{i + 1}" for i in range(d)]
        lines = ["# schema: " + ",".join(cols) + " ; t in curve parameter units, alpha in lattice units", ",".join(cols)]
        ts = np.concatenate([[self.times[0]], self.jump_times])
        for j, t in enumerate(ts):
            lines.append(",".join([repr(float(t)), str(j)] + [str(int(v)) for v in self.alpha[j]]))
        return "\n".join(lines) + "\n"


def _l1_ball_shift(rng, d):
    while True:
        z = rng.uniform(-1.0, 1.0, size=d)
        if np.abs(z).sum() < 1.0:
            return z


def _integer_hits(y, times):
    """Times at which the coordinate path y (piecewise linear in ``times``) meets an integer.

    Returns a list of (time, integer) sorted by time, or None when the path
    stays on an integer during a nondegenerate time interval.
    """
    hits = []
    for s in range(len(y) - 1):
        y0, y1, t0, t1 = y[s], y[s + 1], times[s], times[s + 1]
        if t1 <= t0:
            continue
        if y0 == y1:
            if y0 == np.floor(y0):
                return None
            continue
        lo, hi = min(y0, y1), max(y0, y1)
        ks = np.arange(np.ceil(lo), np.floor(hi) + 1)
        if y1 < y0:
            ks = ks[::-1]
        for k in ks:
            hits.append((t0 + (k - y0) / (y1 - y0) * (t1 - t0), int(k)))
    hits.sort(key=lambda h: h[0])
    dedup = []
    for h in hits:
        if dedup and dedup[-1][1] == h[1] and abs(dedup[-1][0] - h[0]) <= 1e-12 * (1 + abs(h[0])):
            continue
        dedup.append(h)
    return dedup


def discretize_path(curve, lam: float, shift_seed: int, times=None, max_tries: int = 1000) -> DiscretizedPath:
    """Nearest-neighbour lattice path following lam * curve + z, z a random shift in the open l1 unit ball.

    Each coordinate of the lattice point is the last integer visited by the
    corresponding coordinate of the shifted, scaled curve (its floor before
    the first visit).  Shifts making two coordinates visit integers at the same
    time are rejected.  ``times`` defaults to cumulative l1 arclength.
    """
    curve = np.atleast_2d(np.asarray(curve, dtype=float))
    if lam <= 0:
        raise InvalidInput("scale must be positive")
    d = curve.shape[1]
    if times is None:
        seg = np.abs(np.diff(curve, axis=0)).sum(axis=1)
        times = np.concatenate([[0.0], np.cumsum(seg)])
    times = np.asarray(times, dtype=float)
    if len(times) != len(curve) or np.any(np.diff(times) < 0):
        raise InvalidInput("times must be nondecreasing and match the curve")
    rng = np.random.default_rng(shift_seed)
    for _ in range(max_tries):
        z = _l1_ball_shift(rng, d)
        Y = lam * curve + z
        per_axis = [_integer_hits(Y[:, i], times) for i in range(d)]
        if any(h is None for h in per_axis):
            continue
        events = sorted((t, i, k) for i in range(d) for (t, k) in per_axis[i])
        tt = np.array([e[0] for e in events])
        axes = np.array([e[1] for e in events])
        if len(tt) > 1:
            close = np.abs(np.diff(tt)) <= 1e-12 * (1 + np.abs(tt[1:]))
            if np.any(close & (axes[1:] != axes[:-1])):
                continue
        current = np.floor(Y[0]).astype(np.int64)
        alpha = [current.copy()]
        jumps = []
        for t, i, k in events:
            if k != current[i]:
                if abs(k - current[i]) != 1:
                    raise RuntimeError("non-adjacent jump in lattice discretization")
                current[i] = k
                alpha.append(current.copy())
                jumps.append(t)
        return DiscretizedPath(np.array(alpha), np.array(jumps, dtype=float), float(lam), z, curve, times)
    raise RuntimeError("could not find an admissible shift")


def path_edges(config: WeightConfiguration, path: DiscretizedPath):
    """Canonical indices of the edges traversed by the lattice path."""
    out = []
    for p, q in zip(path.alpha[:-1], path.alpha[1:]):
        idx = config.box.edge_index(p, q)
        if idx is None:
            raise InvalidInput(f"lattice path leaves the box at {p} -> {q}")
        out.append(idx)
    if len(path.alpha) and not config.box.contains(path.alpha[0]):
        raise InvalidInput("lattice path starts outside the box")
    return np.unique(np.array(out, dtype=np.int64))


def insert_highway(config: WeightConfiguration, path: DiscretizedPath, level: float) -> WeightConfiguration:
    """Set every edge of the lattice path to min(current weight, level)."""
    if not config.a <= level <= config.b:
        raise InvalidInput("highway level must lie in [a, b]")
    edges = path_edges(config, path)
    w = config.weights.copy()
    w[edges] = np.minimum(w[edges], level)
    return config.with_weights(w)
