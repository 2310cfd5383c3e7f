"""Sampled admissible metrics, seminorm fields and the metric construction toolkit.

A GridMetric stores the pairwise distances of a metric on a finite sample of
a convex window.  Admissible metrics are b-Lipschitz in each argument, so the
samples determine the metric up to 2b times the covering radius of the grid.
"""

from __future__ import annotations

import itertools
import logging
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import cdist

from .geometry import ConvexWindow
from .lattice import InvalidInput

log = logging.getLogger(__name__)


class MetricInvariantError(RuntimeError):
    """A GridMetric violates a metric axiom or the a|.| <= D <= b|.| envelope."""


# Global invariant auditing: when enabled every GridMetric is checked on creation.
AUDIT = {"enabled": False, "checked": 0, "violations": []}


def set_audit(enabled: bool):
    AUDIT["enabled"] = bool(enabled)


# ---------------------------------------------------------------------------
# Seminorms
# ---------------------------------------------------------------------------


class Seminorm:
    """Absolutely homogeneous, subadditive function on R^d."""

    d: int

    def __call__(self, u):
        raise NotImplementedError

    def envelope(self):
        """(lo, hi) with lo |u|_1 <= g(u) <= hi |u|_1."""
        u = l1_sphere_directions(self.d)
        vals = self(u)
        return float(vals.min()), float(vals.max())

    def sup_unit(self):
        return self.envelope()[1]

    def is_norm(self):
        return self.envelope()[0] > 0

    def to_text(self):
        raise NotImplementedError


class ScaledL1(Seminorm):
    def __init__(self, c, d):
        self.c = float(c)
        self.d = int(d)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.c * np.abs(u).sum(axis=-1)

    def envelope(self):
        return self.c, self.c

    def to_text(self):
        return f"l1 {self.c!r} {self.d}"

    def __repr__(self):
        return f"ScaledL1({self.c}, d={self.d})"


class WeightedLinf(Seminorm):
    """u -> max_i zeta_i |u_i|."""

    def __init__(self, zeta):
        self.zeta = np.asarray(zeta, dtype=float)
        if np.any(self.zeta < 0):
            raise InvalidInput("crossing weights must be nonnegative")
        self.d = len(self.zeta)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.max(self.zeta * np.abs(u), axis=-1)

    def envelope(self):
        if np.any(self.zeta == 0):
            return 0.0, float(self.zeta.max())
        return float(1.0 / np.sum(1.0 / self.zeta)), float(self.zeta.max())

    def to_text(self):
        return "linf " + " ".join(repr(float(z)) for z in self.zeta)

    def __repr__(self):
        return f"WeightedLinf({self.zeta.tolist()})"


class MaxSeminorm(Seminorm):
    def __init__(self, parts):
        self.parts = list(parts)
        self.d = self.parts[0].d

    def __call__(self, u):
        return np.max([p(u) for p in self.parts], axis=0)

    def envelope(self):
        # sup of a max is the max of sups; the max of infima is a lower bound,
        # exact when all but one part is constant on the l1 sphere
        envs = [p.envelope() for p in self.parts]
        return max(e[0] for e in envs), max(e[1] for e in envs)

    def to_text(self):
        return "max " + " | ".join(p.to_text() for p in self.parts)

    def __repr__(self):
        return f"MaxSeminorm({self.parts})"


class SampledSeminorm(Seminorm):
    """Seminorm known on a set of l1-unit directions, extended by homogeneity.

    In d = 2 values are interpolated linearly in angle between neighbouring
    directions; in higher dimension the nearest sampled direction is used.
    """

    def __init__(self, directions, values, meta=None):
        self.directions = np.asarray(directions, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.d = self.directions.shape[1]
        self.meta = meta or {}
        if self.d == 2:
            ang = np.arctan2(self.directions[:, 1], self.directions[:, 0])
            order = np.argsort(ang)
            self._ang = ang[order]
            self._val = self.values[order]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1, self.d)
        norm = np.abs(flat).sum(axis=1)
        safe = np.where(norm > 0, norm, 1.0)
        w = flat / safe[:, None]
        if self.d == 2:
            ang = np.arctan2(w[:, 1], w[:, 0])
            per = np.concatenate([self._ang - 2 * np.pi, self._ang, self._ang + 2 * np.pi])
            vals = np.tile(self._val, 3)
            unit = np.interp(ang, per, vals)
        else:
            idx = cdist(w, self.directions, "cityblock").argmin(axis=1)
            unit = self.values[idx]
        out = np.where(norm > 0, unit * norm, 0.0)
        return out.reshape(u.shape[:-1])

    def envelope(self):
        return float(self.values.min()), float(self.values.max())

    def to_text(self):
        body = " ; ".join(" ".join(repr(float(t)) for t in np.append(u, v)) for u, v in zip(self.directions, self.values))
        return "sampled " + body

    def __repr__(self):
        return f"SampledSeminorm({len(self.values)} directions)"


def crossing_seminorm(zeta) -> WeightedLinf:
    """g^zeta(u) = max_i zeta_i |u_i|."""
    return WeightedLinf(zeta)


def seminorm_from_text(text):
    kind, _, body = text.strip().partition(" ")
    if kind == "l1":
        c, d = body.split()
        return ScaledL1(float(c), int(d))
    if kind == "linf":
        return WeightedLinf([float(t) for t in body.split()])
    if kind == "max":
        return MaxSeminorm([seminorm_from_text(t) for t in body.split(" | ")])
    if kind == "sampled":
        rows = np.array([[float(t) for t in chunk.split()] for chunk in body.split(";")])
        return SampledSeminorm(rows[:, :-1], rows[:, -1])
    raise InvalidInput(f"unknown seminorm description {text!r}")


def l1_sphere_directions(d, count=None):
    """Fixed direction set on the l1 unit sphere (64 in d=2, 256 in d=3)."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        count = count or 64
        t = 2 * np.pi * np.arange(count) / count
        u = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        count = count or 256
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        theta = np.pi * (1 + 5 ** 0.5) * i
        u = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
        if d > 3:
            raise InvalidInput("direction sets are provided for d <= 3")
    u[np.abs(u) < 1e-15] = 0.0
    return u / np.abs(u).sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Gradient fields
# ---------------------------------------------------------------------------


class GradientField:
    """Seminorm-valued field: a list of convex regions with seminorms, plus a default.

    At a point covered by several regions the field takes the minimum of their
    seminorms; outside every region it takes the default (b |.|_1).
    """

    def __init__(self, window: ConvexWindow, regions, default: Seminorm, tiling=None):
        self.window = window
        self.regions = list(regions)
        self.default = default
        self.tiling = tiling
        self.d = window.d

    @classmethod
    def constant(cls, window, g):
        return cls(window, [(window, g)], g)

    @classmethod
    def tiled(cls, window, k, seminorm_at, default):
        """One region per inner k-tile, seminorm chosen from the tile centre."""
        inner, _ = window.tiles(k)
        regions = []
        for v in inner:
            centre = (np.asarray(v) + 0.5) / k
            regions.append((window.tile_window(v, k), seminorm_at(centre)))
        return cls(window, regions, default, tiling=k)

    def seminorm_at(self, z):
        z = np.asarray(z, dtype=float)
        hits = [g for (reg, g) in self.regions if reg.contains(z)[0]]
        return hits if hits else [self.default]

    def evaluate(self, points, steps):
        points = np.atleast_2d(points)
        steps = np.atleast_2d(steps)
        out = np.full(len(points), np.inf)
        covered = np.zeros(len(points), dtype=bool)
        for reg, g in self.regions:
            mask = reg.contains(points, tol=1e-12)
            if np.any(mask):
                out[mask] = np.minimum(out[mask], g(steps[mask]))
                covered |= mask
        if not np.all(covered):
            out[~covered] = self.default(steps[~covered])
        return out

    def envelope(self):
        envs = [g.envelope() for _, g in self.regions] + [self.default.envelope()]
        return min(e[0] for e in envs), max(e[1] for e in envs)

    def check_norm_valued(self):
        for reg, g in self.regions + [(self.window, self.default)]:
            if not g.is_norm():
                raise InvalidInput(f"field entry {g!r} is not a norm (nontrivial kernel)")

    def to_text(self):
        lines = ["# gradient field v1", "window " + self.window.to_text(), "default " + self.default.to_text()]
        if self.tiling:
            lines.append(f"tiling {self.tiling}")
        for reg, g in self.regions:
            lines.append("region " + reg.to_text() + " :: " + g.to_text())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        window = default = None
        tiling = None
        regions = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key == "window":
                window = ConvexWindow.from_text(rest)
            elif key == "default":
                default = seminorm_from_text(rest)
            elif key == "tiling":
                tiling = int(rest)
            elif key == "region":
                w, g = rest.split(" :: ")
                regions.append((ConvexWindow.from_text(w), seminorm_from_text(g)))
            else:
                raise InvalidInput(f"unknown gradient field line {line!r}")
        if window is None or default is None:
            raise InvalidInput("gradient field file needs window and default lines")
        return cls(window, regions, default, tiling)


# ---------------------------------------------------------------------------
# GridMetric
# ---------------------------------------------------------------------------


class GridMetric:
    """Pairwise distances of a metric on the sample points origin + spacing * Z^d within a window."""

    def __init__(self, window, points, values, a, b, k=None, spacing=None, origin=None, meta=None, validate=None):
        self.window = window
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.a = float(a)
        self.b = float(b)
        if spacing is None:
            if k is None:
                raise InvalidInput("need a resolution k or a spacing")
            spacing = 1.0 / k
        self.spacing = float(spacing)
        self.origin = np.zeros(self.points.shape[1]) if origin is None else np.asarray(origin, dtype=float)
        self.meta = dict(meta or {})
        n = len(self.points)
        if self.values.shape != (n, n):
            raise InvalidInput("values must be a square matrix over the sample points")
        self.values.setflags(write=False)
        lattice = np.rint((self.points - self.origin) / self.spacing).astype(np.int64)
        self._lattice = lattice
        self._grid = _GridIndex(lattice)
        if validate or (validate is None and AUDIT["enabled"]):
            report = self.check()
            AUDIT["checked"] += 1
            if report["violations"]:
                AUDIT["violations"].append(report)
                raise MetricInvariantError(f"GridMetric invariant violation: {report}")

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def k(self):
        return 1.0 / self.spacing

    def __len__(self):
        return len(self.points)

    def l1(self):
        return cdist(self.points, self.points, "cityblock")

    def covering_radius(self):
        return 0.5 * self.d * self.spacing

    def check(self, rtol=1e-10):
        """Diagonal, symmetry, triangle inequality and envelope checks on all samples."""
        V = self.values
        scale = 1.0 + (np.abs(V).max() if V.size else 0.0)
        tol = rtol * scale
        out = {"diagonal": 0, "symmetry": 0, "triangle": 0, "envelope": 0, "n": len(V)}
        out["diagonal"] = int(np.sum(np.abs(np.diag(V)) > tol))
        out["symmetry"] = int(np.sum(V != V.T))
        L = self.l1()
        out["envelope"] = int(np.sum(V < self.a * L - tol) + np.sum(V > self.b * L + tol))
        tri = 0
        for z in range(len(V)):
            tri += int(np.sum(V > V[:, z][:, None] + V[z, :][None, :] + tol))
        out["triangle"] = tri
        out["violations"] = sum(out[key] for key in ("diagonal", "symmetry", "triangle", "envelope"))
        return out

    def index_of(self, x):
        x = np.asarray(x, dtype=float)
        key = np.rint((x - self.origin) / self.spacing).astype(np.int64)
        i = int(self._grid.lookup(key[None, :])[0])
        if i < 0 or np.abs(self.points[i] - x).max() > 1e-9 * (1 + np.abs(x).max()):
            return None
        return i

    def subgrid_indices(self, pts):
        idx = [self.index_of(p) for p in pts]
        if any(i is None for i in idx):
            raise InvalidInput("points are not samples of the metric")
        return np.array(idx)

    def value(self, P, Q):
        """Local extension: min over nearby samples x', y' of b|x-x'| + D(x',y') + b|y-y'|, capped by b|x-y|."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        cp, wp = self._corners(P)
        cq, wq = self._corners(Q)
        best = self.b * np.abs(P - Q).sum(axis=1)
        for i in range(cp.shape[1]):
            for j in range(cq.shape[1]):
                ok = (cp[:, i] >= 0) & (cq[:, j] >= 0)
                if not np.any(ok):
                    continue
                cand = np.full(len(P), np.inf)
                cand[ok] = wp[ok, i] + self.values[cp[ok, i], cq[ok, j]] + wq[ok, j]
                best = np.minimum(best, cand)
        return best

    def _corners(self, P):
        rel = (P - self.origin) / self.spacing
        base = np.floor(rel + 1e-9).astype(np.int64)
        offs = np.array(list(itertools.product([0, 1], repeat=self.d)))
        idx = np.full((len(P), len(offs)), -1, dtype=np.int64)
        cost = np.full((len(P), len(offs)), np.inf)
        for t, o in enumerate(offs):
            i = self._grid.lookup(base + o)
            ok = i >= 0
            idx[ok, t] = i[ok]
            cost[ok, t] = self.b * np.abs(P[ok] - self.points[i[ok]]).sum(axis=1)
        return idx, cost

    def copy(self, **changes):
        kw = dict(window=self.window, points=self.points, values=self.values.copy(), a=self.a, b=self.b,
                  spacing=self.spacing, origin=self.origin, meta=self.meta)
        kw.update(changes)
        return GridMetric(**kw)

    @classmethod
    def from_seminorm(cls, window, k, g: Seminorm, a=None, b=None):
        pts = window.grid_points(k)
        diff = pts[:, None, :] - pts[None, :, :]
        V = g(diff)
        lo, hi = g.envelope()
        return cls(window, pts, V, lo if a is None else a, hi if b is None else b, k, meta={"source": "seminorm"})

    # serialization ------------------------------------------------------
    def to_text(self):
        lines = [
            "# grid metric v1",
            "# window " + self.window.to_text(),
            f"# spacing {self.spacing!r}",
            "# origin " + " ".join(repr(float(t)) for t in self.origin),
            f"# bounds {self.a!r} {self.b!r}",
            "# points " + " ; ".join(" ".join(repr(float(t)) for t in p) for p in self.points),
            "# schema: i,j,distance (upper triangle including diagonal)",
            "i,j,distance",
        ]
        n = len(self.points)
        for i in range(n):
            for j in range(i, n):
                lines.append(f"{i},{j},{float(self.values[i, j])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        head = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, rest = line[1:].strip().partition(" ")
                head[key] = rest
            elif line.strip() and line[0].isdigit():
                i, j, v = line.split(",")
                rows.append((int(i), int(j), float(v)))
        try:
            window = ConvexWindow.from_text(head["window"])
            pts = np.array([[float(t) for t in chunk.split()] for chunk in head["points"].split(";")])
            a, b = (float(t) for t in head["bounds"].split())
            spacing = float(head["spacing"])
            origin = np.array([float(t) for t in head["origin"].split()])
        except (KeyError, ValueError) as exc:
            raise InvalidInput(f"malformed grid metric file: {exc}") from exc
        V = np.zeros((len(pts), len(pts)))
        for i, j, v in rows:
            V[i, j] = V[j, i] = v
        return cls(window, pts, V, a, b, spacing=spacing, origin=origin)


# ---------------------------------------------------------------------------
# Distances and diagnostics
# ---------------------------------------------------------------------------


def _same_grid(D1, D2):
    return D1.points.shape == D2.points.shape and np.allclose(D1.points, D2.points, atol=1e-12)


def uniform_distance(D1: GridMetric, D2: GridMetric) -> float:
    if not _same_grid(D1, D2):
        raise InvalidInput("uniform distance needs metrics sampled on the same grid")
    return float(np.abs(D1.values - D2.values).max())


def midpoint_defect(D: GridMetric) -> float:
    """max over (x, y) of min over z of max(D(x,z), D(z,y)) - D(x,y)/2."""
    V = D.values
    best = np.full(V.shape, np.inf)
    for z in range(len(V)):
        np.minimum(best, np.maximum(V[:, z][:, None], V[z, :][None, :]), out=best)
    return float((best - V / 2).max())


def equicontinuity_defect(D: GridMetric) -> float:
    """max of |D(x,y) - D(x',y')| - b(|x-x'| + |y-y'|) over sampled quadruples (<= 0 when Lipschitz)."""
    V, L = D.values, D.l1()
    worst = -np.inf
    for i in range(len(V)):
        # x' = sample i, all x, y, y'
        lhs = np.abs(V[:, :, None] - V[i][None, None, :])
        rhs = D.b * (L[:, i][:, None, None] + L[None, :, :])
        worst = max(worst, float((lhs - rhs).max()))
    return worst


def extend_metric(D: GridMetric, x, y) -> float:
    """D-hat(x, y) = min(min_{x',y'} b|x-x'| + D(x',y') + b|y-y'|, b|x-y|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bx = D.b * np.abs(D.points - x).sum(axis=1)
    by = D.b * np.abs(D.points - y).sum(axis=1)
    inner = (bx[:, None] + D.values + by[None, :]).min()
    return float(min(inner, D.b * np.abs(x - y).sum()))


def default_h_sequence(window: ConvexWindow):
    scale = float(np.min(window.upper - window.lower))
    return scale * 2.0 ** -np.arange(1, 7)


def estimate_gradient(D: GridMetric, z, directions=None, h_sequence=None) -> SampledSeminorm:
    """Per-direction minimum over h of D-hat(z, z + h u) / h."""
    z = np.asarray(z, dtype=float)
    directions = l1_sphere_directions(D.d) if directions is None else np.asarray(directions, dtype=float)
    h_sequence = default_h_sequence(D.window) if h_sequence is None else np.asarray(h_sequence, dtype=float)
    boundary = not D.window.is_interior(z)
    if boundary:
        log.warning("gradient requested at boundary point %s; using the extension", z)
    bz = D.b * np.abs(D.points - z).sum(axis=1)
    reach = (bz[:, None] + D.values).min(axis=0)
    norms = np.abs(directions).sum(axis=1)
    best = np.full(len(directions), np.inf)
    for h in h_sequence:
        Y = z + h * directions
        q = (reach[None, :] + D.b * cdist(Y, D.points, "cityblock")).min(axis=1)
        q = np.minimum(q, D.b * h * norms)
        best = np.minimum(best, q / h)
    return SampledSeminorm(directions, best / norms,
                           meta={"h_min": float(np.min(h_sequence)), "boundary": boundary, "liminf_proxy": "min over h"})


# ---------------------------------------------------------------------------
# Stencil shortest paths
# ---------------------------------------------------------------------------


def stencil_offsets(d, radius=2):
    """Primitive integer vectors with l_inf norm <= radius, one per +/- pair."""
    out = []
    for v in itertools.product(range(-radius, radius + 1), repeat=d):
        v = np.array(v)
        if not v.any() or math.gcd(*[abs(int(t)) for t in v]) != 1:
            continue
        first = v[np.flatnonzero(v)[0]]
        if first > 0:
            out.append(v)
    return np.array(out)


class _GridIndex:
    """Dense lookup from integer lattice coordinates to sample ids."""

    def __init__(self, lattice):
        self.lo = lattice.min(axis=0)
        self.shape = tuple(lattice.max(axis=0) - self.lo + 1)
        self.table = np.full(self.shape, -1, dtype=np.int64)
        self.table[tuple((lattice - self.lo).T)] = np.arange(len(lattice))

    def lookup(self, lattice):
        rel = lattice - self.lo
        ok = np.all((rel >= 0) & (rel < np.array(self.shape)), axis=1)
        out = np.full(len(lattice), -1, dtype=np.int64)
        out[ok] = self.table[tuple(rel[ok].T)]
        return out


def _stencil_arcs(lattice, radius):
    """All pairs (i, j) of samples whose lattice offset is a stencil vector."""
    index = _GridIndex(lattice)
    src, dst = [], []
    for off in stencil_offsets(lattice.shape[1], radius):
        j = index.lookup(lattice + off)
        ok = j >= 0
        src.append(np.flatnonzero(ok))
        dst.append(j[ok])
    return np.concatenate(src), np.concatenate(dst)


def _all_pairs(n_nodes, src, dst, cost, sources, targets):
    mat = csr_matrix((np.concatenate([cost, cost]), (np.concatenate([src, dst]), np.concatenate([dst, src]))),
                     shape=(n_nodes, n_nodes))
    dist = dijkstra(mat, indices=sources)
    T = dist[:, targets]
    return np.minimum(T, T.T) if len(sources) == len(targets) and np.array_equal(sources, targets) else T


def _fine_to_output(window, m, k):
    if k is None:
        k = m
    if m % k:
        raise InvalidInput("fine resolution must be a multiple of the output resolution")
    fine = window.grid_points(m)
    lattice = np.rint(fine * m).astype(np.int64)
    out_mask = np.all(lattice % (m // k) == 0, axis=1)
    return fine, lattice, np.flatnonzero(out_mask), k


def prescribe_metric(field: GradientField, m: int, k: int | None = None, radius: int = 2) -> GridMetric:
    """Shortest paths on the m-grid with arc cost g_midpoint(step); sampled on the k-grid."""
    field.check_norm_valued()
    fine, lattice, out_ids, k = _fine_to_output(field.window, m, k)
    src, dst = _stencil_arcs(lattice, radius)
    steps = fine[dst] - fine[src]
    mids = 0.5 * (fine[src] + fine[dst])
    cost = field.evaluate(mids, steps)
    T = _all_pairs(len(fine), src, dst, cost, out_ids, out_ids)
    np.fill_diagonal(T, 0.0)
    lo, hi = field.envelope()
    return GridMetric(field.window, fine[out_ids], T, lo, hi, k, meta={"source": "prescribe", "m": m})


def scale_metric(D: GridMetric, lam: float) -> GridMetric:
    """D_lam(x, y) = lam * D(x / lam, y / lam) on lam * X."""
    if lam <= 0:
        raise InvalidInput("scale factor must be positive")
    if lam == 1:
        return D.copy()
    return GridMetric(D.window.scaled(lam), D.points * lam, D.values * lam, D.a, D.b,
                      spacing=D.spacing * lam, origin=D.origin * lam, meta={**D.meta, "scaled": lam})


def translate_metric(D: GridMetric, z0) -> GridMetric:
    z0 = np.asarray(z0, dtype=float)
    return GridMetric(D.window.translated(z0), D.points + z0, D.values.copy(), D.a, D.b,
                      spacing=D.spacing, origin=D.origin + z0, meta={**D.meta, "translated": z0.tolist()})


def _ball_inside(window_x, window_y, pts, radius):
    """Does the l1 ball of the given radius around each point, intersected with X, lie in Y?"""
    if window_x.is_box and window_y.is_box:
        ok = np.ones(len(pts), dtype=bool)
        for i in range(pts.shape[1]):
            if window_y.lower[i] > window_x.lower[i] + 1e-12:
                ok &= pts[:, i] - radius >= window_y.lower[i] - 1e-12
            if window_y.upper[i] < window_x.upper[i] - 1e-12:
                ok &= pts[:, i] + radius <= window_y.upper[i] + 1e-12
        return ok
    radius = np.broadcast_to(np.asarray(radius, dtype=float), (len(pts),))
    ok = np.ones(len(pts), dtype=bool)
    for sign in (1, -1):
        for e in np.eye(pts.shape[1]):
            ok &= window_y.contains(pts + sign * radius[:, None] * e)
    return ok


def restrict_metric(D: GridMetric, Y: ConvexWindow, radius: int = 1) -> GridMetric:
    """Path infimum of D-lengths inside Y, on the samples of D lying in Y.

    Arcs join samples at stencil offsets (local D-lengths) and, in addition,
    any pair whose D-geodesics provably stay in Y: geodesics from x to y lie
    in the l1 ball of radius (b/a)|x - y| around x.
    """
    if Y.same_as(D.window):
        return D.copy()
    if not D.window.contains_window(Y):
        raise InvalidInput("restriction window must lie inside the metric's window")
    keep = np.flatnonzero(Y.contains(D.points))
    if len(keep) == 0 or not any(Y.is_interior(p) for p in D.points[keep]):
        raise InvalidInput("restriction window has no interior sample points")
    pts = D.points[keep]
    V = D.values[np.ix_(keep, keep)]
    src, dst = _stencil_arcs(D._lattice[keep], radius)
    arcs = {(int(s), int(t)) for s, t in zip(src, dst)}
    if D.a > 0:
        L = cdist(pts, pts, "cityblock")
        for i in range(len(pts)):
            rad = (D.b / D.a) * L[i]
            ok = _ball_inside(D.window, Y, np.repeat(pts[i][None, :], len(pts), axis=0), rad)
            for j in np.flatnonzero(ok):
                if j > i:
                    arcs.add((i, int(j)))
    src = np.array([s for s, _ in arcs], dtype=np.int64)
    dst = np.array([t for _, t in arcs], dtype=np.int64)
    ids = np.arange(len(pts))
    T = _all_pairs(len(pts), src, dst, V[src, dst], ids, ids)
    np.fill_diagonal(T, 0.0)
    return GridMetric(Y, pts, T, D.a, D.b, spacing=D.spacing, origin=D.origin, meta={**D.meta, "restricted": True})


def stitch_metrics(pieces, ambient: ConvexWindow, m: int, k: int | None = None, b=None, radius: int = 2) -> GridMetric:
    """Metric whose local length is the minimum of the covering pieces' lengths, b|.|_1 elsewhere."""
    if b is None:
        if not pieces:
            raise InvalidInput("need b when no pieces are given")
        b = max(D.b for _, D in pieces)
    a = min([D.a for _, D in pieces] + [b])
    fine, lattice, out_ids, k = _fine_to_output(ambient, m, k)
    src, dst = _stencil_arcs(lattice, radius)
    cost = b * np.abs(fine[dst] - fine[src]).sum(axis=1)
    for win, D in pieces:
        if not ambient.contains_window(win):
            raise InvalidInput("piece window must lie in the ambient window")
        inside = win.contains(fine[src], tol=1e-12) & win.contains(fine[dst], tol=1e-12)
        if np.any(inside):
            local = D.value(fine[src[inside]], fine[dst[inside]])
            cost[inside] = np.minimum(cost[inside], local)
    T = _all_pairs(len(fine), src, dst, cost, out_ids, out_ids)
    np.fill_diagonal(T, 0.0)
    return GridMetric(ambient, fine[out_ids], T, a, b, k, meta={"source": "stitch", "m": m})


# ---------------------------------------------------------------------------
# Corridor lemma
# ---------------------------------------------------------------------------


def corridor_lower_bound(D_target: GridMetric, tiles, delta1, delta2, eps) -> np.ndarray:
    """Pairwise bound D(x, y) - 3 diam(X) (eps + delta2 / delta1)."""
    if delta1 <= 0 or delta2 < 0 or not 0 < eps < D_target.b / 2:
        raise InvalidInput("need delta1 > 0, delta2 >= 0 and 0 < eps < b/2")
    diam = D_target.window.diameter
    if delta1 > diam:
        raise InvalidInput("delta1 must not exceed diam(X)")
    return D_target.values - 3.0 * diam * (eps + delta2 / delta1)


def box_l1_gap(w1: ConvexWindow, w2: ConvexWindow) -> float:
    gap = np.maximum(0.0, np.maximum(w1.lower - w2.upper, w2.lower - w1.upper))
    return float(gap.sum())


def check_corridor_hypotheses(D_target: GridMetric, tiles, tile_metrics, corridor_ok, delta1, delta2, slack=0.0):
    """Check tile separation, per-tile control and corridor intensity.

    ``tile_metrics`` are the restrictions of D' to each tile (GridMetrics on
    the tile samples); ``corridor_ok`` is the outcome of the corridor intensity
    check (for lattice configurations: every edge outside the tiles is slow).
    ``slack`` is added to the measured control deficit to cover points between
    samples.  Returns a report dict with a ``passed`` flag and failures.
    """
    failures = []
    for i, j in itertools.combinations(range(len(tiles)), 2):
        if not (tiles[i].is_box and tiles[j].is_box):
            raise InvalidInput("tile separation is checked for box tiles")
        gap = box_l1_gap(tiles[i], tiles[j])
        if gap < delta1 - 1e-12:
            failures.append(("separation", i, j, gap))
    worst = 0.0
    for t, Dt in enumerate(tile_metrics):
        idx = D_target.subgrid_indices(Dt.points)
        deficit = float((D_target.values[np.ix_(idx, idx)] - Dt.values).max())
        worst = max(worst, deficit)
        if deficit + slack > delta2 + 1e-12:
            failures.append(("control", t, deficit + slack))
    if not corridor_ok:
        failures.append(("intensity",))
    return {"passed": not failures, "failures": failures, "control_deficit": worst}
