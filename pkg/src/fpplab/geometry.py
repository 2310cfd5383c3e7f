"""Convex windows, Minkowski gauges, erosion, tilings and Hausdorff distances.

All distances are l1 distances.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree
from scipy.spatial.distance import cdist

from .lattice import InvalidInput

_TOL = 1e-12


class ConvexWindow:
    """A compact convex set with nonempty interior: an axis box or a polytope (d <= 3)."""

    def __init__(self, kind, lower=None, upper=None, vertices=None):
        self.kind = kind
        if kind == "box":
            self.lower = np.asarray(lower, dtype=float)
            self.upper = np.asarray(upper, dtype=float)
            if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
                raise InvalidInput("box window needs upper > lower in every coordinate")
            d = len(self.lower)
            self.vertices = np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)
            self.A = np.vstack([np.eye(d), -np.eye(d)])
            self.c = np.concatenate([self.upper, -self.lower])
        elif kind == "polytope":
            pts = np.asarray(vertices, dtype=float)
            if pts.ndim != 2 or pts.shape[1] not in (1, 2, 3):
                raise InvalidInput("polytope windows are supported for d <= 3")
            if pts.shape[1] == 1:
                return self.__init__("box", [pts.min()], [pts.max()])
            try:
                hull = ConvexHull(pts)
            except Exception as exc:
                raise InvalidInput(f"polytope without interior: {exc}") from exc
            self.vertices = pts[hull.vertices]
            eq = hull.equations
            A, c = eq[:, :-1], -eq[:, -1]
            # merge coplanar facets of triangulated hulls
            key = np.round(np.hstack([A, c[:, None]]), 10)
            _, keep = np.unique(key, axis=0, return_index=True)
            self.A, self.c = A[np.sort(keep)], c[np.sort(keep)]
            self.lower = self.vertices.min(axis=0)
            self.upper = self.vertices.max(axis=0)
        else:
            raise InvalidInput(f"unknown window kind {kind!r}")
        self.d = self.vertices.shape[1]

    # constructors ------------------------------------------------------
    @classmethod
    def box(cls, lower, upper):
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def cube(cls, d, lo=0.0, hi=1.0):
        return cls.box([lo] * d, [hi] * d)

    @classmethod
    def polytope(cls, vertices):
        return cls("polytope", vertices=vertices)

    @classmethod
    def l1_ball(cls, d, radius=1.0, center=None):
        center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        eye = np.eye(d) * radius
        return cls.polytope(np.vstack([center + eye, center - eye]))

    @classmethod
    def simplex(cls, d, scale=1.0):
        return cls.polytope(np.vstack([np.zeros(d), np.eye(d) * scale]))

    # basic queries -----------------------------------------------------
    @property
    def is_box(self):
        return self.kind == "box"

    def contains(self, x, tol=1e-9):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scale = 1.0 + np.abs(self.c)
        out = np.all(x @ self.A.T <= self.c + tol * scale, axis=1)
        return out

    def contains_window(self, other, tol=1e-9):
        return bool(np.all(self.contains(other.vertices, tol)))

    @property
    def diameter(self):
        """l1 diameter (attained at a pair of vertices)."""
        if self.is_box:
            return float(np.sum(self.upper - self.lower))
        return float(cdist(self.vertices, self.vertices, "cityblock").max())

    @property
    def volume(self):
        if self.is_box:
            return float(np.prod(self.upper - self.lower))
        return float(ConvexHull(self.vertices).volume)

    @property
    def interior_point(self):
        return self.vertices.mean(axis=0)

    def is_interior(self, z, tol=1e-12):
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.A @ z < self.c - tol))

    def same_as(self, other, tol=1e-12):
        if self.d != other.d or self.kind != other.kind:
            return False
        if self.is_box:
            return bool(np.allclose(self.lower, other.lower, atol=tol) and np.allclose(self.upper, other.upper, atol=tol))
        a = np.array(sorted(map(tuple, np.round(self.vertices, 12))))
        b = np.array(sorted(map(tuple, np.round(other.vertices, 12))))
        return a.shape == b.shape and bool(np.allclose(a, b, atol=tol))

    # transforms ----------------------------------------------------------
    def scaled(self, lam):
        if lam <= 0:
            raise InvalidInput("scale factor must be positive")
        if self.is_box:
            return ConvexWindow.box(self.lower * lam, self.upper * lam)
        return ConvexWindow.polytope(self.vertices * lam)

    def translated(self, z):
        z = np.asarray(z, dtype=float)
        if self.is_box:
            return ConvexWindow.box(self.lower + z, self.upper + z)
        return ConvexWindow.polytope(self.vertices + z)

    def homothety(self, delta, z):
        """(1 - delta) X + delta z."""
        z = np.asarray(z, dtype=float)
        if self.is_box:
            return ConvexWindow.box((1 - delta) * self.lower + delta * z, (1 - delta) * self.upper + delta * z)
        return ConvexWindow.polytope((1 - delta) * self.vertices + delta * z)

    # grids -----------------------------------------------------------------
    def grid_points(self, k, origin=None):
        """Points of origin + (1/k) Z^d inside the window, in lexicographic order."""
        origin = np.zeros(self.d) if origin is None else np.asarray(origin, dtype=float)
        lo = np.ceil((self.lower - origin) * k - 1e-9).astype(int)
        hi = np.floor((self.upper - origin) * k + 1e-9).astype(int)
        axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        idx = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, self.d)
        pts = origin + idx / k
        return pts[self.contains(pts)]

    # gauge -----------------------------------------------------------------
    def gauge(self, z, x):
        """Minkowski functional of the window centred at the interior point z."""
        z = np.asarray(z, dtype=float)
        if not self.is_interior(z):
            raise InvalidInput("gauge centre must be an interior point")
        x = np.asarray(x, dtype=float)
        slack = self.c - self.A @ z
        vals = (np.atleast_2d(x) - z) @ self.A.T / slack
        g = np.maximum(vals.max(axis=1), 0.0)
        return g if x.ndim > 1 else float(g[0])

    def safety_radius(self, z, delta):
        """Lower bound on the l1 distance from (1-delta)X + delta z to the complement of X."""
        z = np.asarray(z, dtype=float)
        dirs = np.vstack([np.eye(self.d), -np.eye(self.d)])
        worst = self.gauge(z, dirs + z).max()
        return delta / worst

    def distance_to_complement(self, x):
        """l1 distance from points of X to the complement (0 outside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dual = np.abs(self.A).max(axis=1)
        return np.maximum(((self.c - x @ self.A.T) / dual).min(axis=1), 0.0)

    def erode(self, delta):
        """X^{-delta} = {z in X : d(z, X^c) >= delta}."""
        if delta <= 0:
            raise InvalidInput("erosion depth must be positive")
        if self.is_box:
            lo, hi = self.lower + delta, self.upper - delta
            if np.any(hi <= lo):
                raise InvalidInput(f"erosion by {delta} leaves an empty window")
            return ConvexWindow.box(lo, hi)
        dual = np.abs(self.A).max(axis=1)
        c2 = self.c - delta * dual
        centre, radius = _chebyshev_centre(self.A, c2)
        if radius <= 1e-12:
            raise InvalidInput(f"erosion by {delta} leaves an empty window")
        hs = HalfspaceIntersection(np.hstack([self.A, -c2[:, None]]), centre)
        return ConvexWindow.polytope(hs.intersections)

    # tiles -------------------------------------------------------------------
    def tiles(self, k):
        """Inner and outer k-tilings: lists of integer vectors v with tile (v + [0,1]^d)/k.

        Inner tiles lie in X; outer tiles meet X in a set with nonempty interior.
        """
        lo = np.floor(self.lower * k + 1e-9).astype(int)
        hi = np.ceil(self.upper * k - 1e-9).astype(int)
        inner, outer = [], []
        corners = np.array(list(itertools.product([0, 1], repeat=self.d)))
        for v in itertools.product(*[range(l, h) for l, h in zip(lo, hi)]):
            v = np.array(v)
            pts = (v + corners) / k
            inside = self.contains(pts, tol=1e-12)
            if inside.all():
                inner.append(tuple(v))
                outer.append(tuple(v))
            elif self._tile_meets_interior(v, k, inside):
                outer.append(tuple(v))
        return inner, outer

    def _tile_meets_interior(self, v, k, corner_inside):
        lo, hi = v / k, (v + 1) / k
        if self.is_box:
            return bool(np.all(np.minimum(hi, self.upper) - np.maximum(lo, self.lower) > _TOL))
        centre = (lo + hi) / 2
        if self.contains(centre, tol=-1e-12)[0]:
            return True
        # largest s with a point x: A x <= c - s |A|_inf, lo + s <= x <= hi - s
        d = self.d
        dual = np.abs(self.A).max(axis=1)
        A_ub = np.vstack([
            np.hstack([self.A, dual[:, None]]),
            np.hstack([-np.eye(d), np.ones((d, 1))]),
            np.hstack([np.eye(d), np.ones((d, 1))]),
        ])
        b_ub = np.concatenate([self.c, -lo, hi])
        cost = np.zeros(d + 1)
        cost[-1] = -1.0
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d + [(None, 1.0)], method="highs")
        return bool(res.status == 0 and -res.fun > 1e-10)

    def tile_window(self, v, k):
        v = np.asarray(v, dtype=float)
        return ConvexWindow.box(v / k, (v + 1) / k)

    # text form ---------------------------------------------------------------
    def to_text(self):
        if self.is_box:
            return "box " + " ".join(repr(float(t)) for t in self.lower) + " ; " + " ".join(repr(float(t)) for t in self.upper)
        rows = [" ".join(repr(float(t)) for t in v) for v in self.vertices]
        return "polytope " + " ; ".join(rows)

    @classmethod
    def from_text(cls, text):
        text = text.strip()
        kind, _, body = text.partition(" ")
        try:
            parts = [[float(t) for t in chunk.split()] for chunk in body.split(";")]
        except ValueError as exc:
            raise InvalidInput(f"bad window description {text!r}") from exc
        if kind == "box" and len(parts) == 2:
            return cls.box(parts[0], parts[1])
        if kind == "polytope":
            return cls.polytope(parts)
        raise InvalidInput(f"bad window description {text!r}")

    def __repr__(self):
        return f"ConvexWindow({self.to_text()})"


def _chebyshev_centre(A, c):
    """Centre and l_inf-dual radius of the largest ball inside {A x <= c}."""
    d = A.shape[1]
    dual = np.abs(A).max(axis=1)
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=np.hstack([A, dual[:, None]]), b_ub=c,
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0:
        return np.zeros(d), 0.0
    return res.x[:d], float(res.x[-1])


def hausdorff(A, B, accelerate=False):
    """l1 Hausdorff distance between two finite nonempty point sets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0 or len(A) == 0 or len(B) == 0:
        raise InvalidInput("Hausdorff distance needs nonempty point sets")
    if accelerate:
        da, _ = cKDTree(B).query(A, p=1)
        db, _ = cKDTree(A).query(B, p=1)
        return float(max(da.max(), db.max()))
    best_a = np.full(len(A), np.inf)
    best_b = np.full(len(B), np.inf)
    step = max(1, 2_000_000 // max(len(B), 1))
    for s in range(0, len(A), step):
        block = cdist(A[s:s + step], B, "cityblock")
        best_a[s:s + step] = block.min(axis=1)
        np.minimum(best_b, block.min(axis=0), out=best_b)
    return float(max(best_a.max(), best_b.max()))
