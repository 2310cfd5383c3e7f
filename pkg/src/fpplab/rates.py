"""Integral rate functional, crossing rates, point-to-point rates, symmetrization and the ball map."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .geometry import ConvexWindow, hausdorff
from .lattice import BoundedLaw, InvalidInput
from .metric import (GradientField, GridMetric, MaxSeminorm, SampledSeminorm, ScaledL1, Seminorm, WeightedLinf,
                     _fine_to_output, _stencil_arcs, crossing_seminorm, estimate_gradient,
                     scale_metric, stencil_offsets, stitch_metrics, translate_metric)


# ---------------------------------------------------------------------------
# Elementary cost models
# ---------------------------------------------------------------------------


@dataclass
class ElementaryCostModel:
    """A seminorm -> [0, inf] cost together with the structural properties it claims."""

    evaluator: object
    name: str
    a: float
    b: float
    d: int
    monotone: bool = True
    reflection_invariant: bool = True
    finite_at_b: bool | None = None
    consistent: bool = True          # cost(a |.|_1) = 0

    def __call__(self, g: Seminorm) -> float:
        v = float(self.evaluator(g))
        if v < 0:
            raise ValueError(f"cost model {self.name} returned a negative value")
        return v

    def check_monotone(self, samples: int = 200, seed: int = 0) -> list:
        """Randomized spot check on ordered pairs of crossing/l1 mixtures; returns the violating pairs."""
        rng = np.random.default_rng(seed)
        bad = []
        for _ in range(samples):
            z1 = rng.uniform(self.a, self.b, self.d)
            z2 = np.minimum(self.b, z1 + rng.uniform(0, self.b - self.a, self.d) * rng.integers(0, 2, self.d))
            c1 = rng.uniform(self.a, z1.min())
            c2 = rng.uniform(c1, max(c1, z2.min()))
            g1 = MaxSeminorm([WeightedLinf(z1), ScaledL1(c1, self.d)])
            g2 = MaxSeminorm([WeightedLinf(z2), ScaledL1(c2, self.d)])
            if self(g1) > self(g2) + 1e-12:
                bad.append((g1, g2))
        return bad


def bound_model(law: BoundedLaw, d: int) -> ElementaryCostModel:
    """I_b(g) = -d log nu([sup_{|u|_1 = 1} g(u), b])."""

    def cost(g):
        top = g.sup_unit()
        m = law.mass_at(law.b) if top >= law.b - 1e-12 else law.mass_above(top - 1e-12)
        return math.inf if m <= 0 else max(0.0, -d * math.log(m))

    return ElementaryCostModel(cost, f"bound[{law.describe()}]", law.a, law.b, d,
                               finite_at_b=law.mass_at(law.b) > 0)


class EmpiricalModel:
    """Rates of LD+(zeta |.|_1) measured at a few levels, evaluated at sup_{|u|_1=1} g.

    The table is made nondecreasing by a running maximum and interpolated
    linearly; levels above the largest measured one cost +inf unless the
    largest level is b.
    """

    def __init__(self, levels, rates):
        order = np.argsort(levels)
        self.levels = np.asarray(levels, dtype=float)[order]
        self.rates = np.maximum.accumulate(np.asarray(rates, dtype=float)[order])

    def __call__(self, g):
        s = g.sup_unit()
        if s > self.levels[-1] + 1e-12:
            return math.inf
        return float(np.interp(s, self.levels, self.rates))


def empirical_model(law: BoundedLaw, d: int, levels, rates) -> ElementaryCostModel:
    ev = EmpiricalModel(levels, rates)
    return ElementaryCostModel(ev, f"empirical[{law.describe()}]", law.a, law.b, d,
                               finite_at_b=bool(np.isfinite(ev.rates[-1]) and ev.levels[-1] >= law.b))


def empirical_model_from_estimates(law: BoundedLaw, d: int, levels, estimates) -> ElementaryCostModel:
    """Use the rate at the largest n of each level's estimate sequence."""
    return empirical_model(law, d, levels, [seq[-1].rate for seq in estimates])


def toy_model(fn, name, a, b, d, **flags) -> ElementaryCostModel:
    return ElementaryCostModel(fn, name, a, b, d, **flags)


def excess_model(m: float, a: float, b: float, d: int) -> ElementaryCostModel:
    """c(g) = max(0, sup_{|u|_1=1} g(u) - m)^2."""
    return ElementaryCostModel(lambda g: max(0.0, g.sup_unit() - m) ** 2, f"excess[{m}]", a, b, d,
                               consistent=m >= a)


# ---------------------------------------------------------------------------
# Integral rate
# ---------------------------------------------------------------------------


@dataclass
class IntegralRate:
    value: float
    lower: float
    upper: float
    infinite_tiles: list = field(default_factory=list)
    method: str = "tiles"

    def __float__(self):
        return float(self.value)


def _box_overlap(w1: ConvexWindow, w2: ConvexWindow) -> float:
    side = np.minimum(w1.upper, w2.upper) - np.maximum(w1.lower, w2.lower)
    return float(np.prod(np.clip(side, 0, None)))


def _field_by_regions(field_: GradientField, model):
    """Exact integral when X and all regions are boxes with disjoint interiors."""
    X = field_.window
    if not X.is_box or not all(r.is_box for r, _ in field_.regions):
        return None
    regs = field_.regions
    for i in range(len(regs)):
        for j in range(i + 1, len(regs)):
            if _box_overlap(regs[i][0], regs[j][0]) > 0:
                return None
    total, covered, bad = 0.0, 0.0, []
    for idx, (r, g) in enumerate(regs):
        vol = _box_overlap(r, X)
        if vol <= 0:
            continue
        c = model(g)
        covered += vol
        if math.isinf(c):
            bad.append(("region", idx))
        else:
            total += vol * c
    rest = X.volume - covered
    if rest > 1e-12:
        c = model(field_.default)
        if math.isinf(c):
            bad.append(("default",))
        else:
            total += rest * c
    if bad:
        return IntegralRate(math.inf, math.inf, math.inf, bad, "regions")
    return IntegralRate(total, total, total, [], "regions")


def _tile_fraction(window: ConvexWindow, v, k, sub=8):
    d = window.d
    g = (np.stack(np.meshgrid(*[np.arange(sub)] * d, indexing="ij"), -1).reshape(-1, d) + 0.5) / sub
    pts = (np.asarray(v) + g) / k
    return float(window.contains(pts, tol=0).mean())


def _lattice_gradient(D: GridMetric, i, reach):
    """Difference quotients of D at sample i along primitive lattice directions, steps landing on samples."""
    offs = stencil_offsets(D.d, 2)
    offs = np.vstack([offs, -offs])
    z = D.points[i]
    dirs, vals = [], []
    for v in offs:
        L = float(np.abs(v).sum())
        best = np.inf
        t = 1
        while t * D.spacing * L <= reach + 1e-12:
            j = D.index_of(z + t * D.spacing * v)
            if j is None:
                break
            best = min(best, D.values[i, j] / (t * D.spacing * L))
            t += 1
        if np.isfinite(best):
            dirs.append(v / L)
            vals.append(best)
    if len(dirs) < 2 * D.d:
        return None
    return SampledSeminorm(np.array(dirs), np.array(vals), meta={"source": "lattice quotients"})


def _gradient_cost_at(D, centre, k, model):
    if isinstance(D, GradientField):
        gs = D.seminorm_at(centre)
        return min(model(g) for g in gs)
    side = 1.0 / k
    i = D.index_of(centre)
    if i is not None:
        g = _lattice_gradient(D, i, side / 2)
        if g is not None:
            return model(g)
    hs = np.array([side / 2, side / 4, side / 8])
    hs = hs[hs >= D.spacing - 1e-12]
    if len(hs) == 0:
        hs = np.array([D.spacing])
    return model(estimate_gradient(D, centre, h_sequence=hs))


def integral_rate(D, model: ElementaryCostModel, k: int) -> IntegralRate:
    """Integral over X of model((grad D)_z): tile-midpoint quadrature on the k-tiling.

    ``lower`` sums over tiles inside X and ``upper`` over tiles meeting X;
    ``value`` weights boundary tiles by the fraction of their volume in X.
    Piecewise-constant fields on disjoint boxes are integrated exactly.
    """
    if isinstance(D, GradientField):
        exact = _field_by_regions(D, model)
        if exact is not None:
            return exact
    window = D.window
    inner, outer = window.tiles(k)
    inner_set = set(inner)
    vol = (1.0 / k) ** window.d
    lower = value = upper = 0.0
    bad = []
    for v in outer:
        centre = (np.asarray(v) + 0.5) / k
        frac = 1.0 if v in inner_set else _tile_fraction(window, v, k)
        if frac <= 0:
            continue
        if not window.contains(centre)[0]:
            centre = np.clip(centre, window.lower + 1e-9, window.upper - 1e-9)
            if not window.contains(centre)[0]:
                centre = window.interior_point()
        c = _gradient_cost_at(D, centre, k, model)
        if math.isinf(c):
            bad.append(v)
            continue
        value += frac * vol * c
        upper += vol * c
        if v in inner_set:
            lower += vol * c
    if bad:
        return IntegralRate(math.inf, math.inf, math.inf, bad)
    return IntegralRate(value, lower, upper, [])


# ---------------------------------------------------------------------------
# Crossing rates
# ---------------------------------------------------------------------------


def crossing_rate(zeta, model: ElementaryCostModel) -> float:
    """model(max(g^zeta, a |.|_1))."""
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta < model.a - 1e-12) or np.any(zeta > model.b + 1e-12):
        raise InvalidInput("crossing vector entries must lie in [a, b]")
    return model(MaxSeminorm([crossing_seminorm(zeta), ScaledL1(model.a, len(zeta))]))


def two_slab_field(zeta, zeta_alt, theta, axis=0, a=None, window=None) -> GradientField:
    """g^zeta on {x_axis < theta} and g^zeta' on {x_axis > theta}, where zeta' differs from zeta only on ``axis``."""
    zeta = np.asarray(zeta, dtype=float)
    zeta_alt = np.asarray(zeta_alt, dtype=float)
    d = len(zeta)
    window = window or ConvexWindow.cube(d)
    lo, hi = window.lower.copy(), window.upper.copy()
    cut = lo[axis] + theta * (hi[axis] - lo[axis])
    up1, lo2 = hi.copy(), lo.copy()
    up1[axis] = cut
    lo2[axis] = cut
    gs = []
    for z in (zeta, zeta_alt):
        g = crossing_seminorm(z)
        gs.append(g if a is None else MaxSeminorm([g, ScaledL1(a, d)]))
    b = float(max(zeta.max(), zeta_alt.max()))
    return GradientField(window, [(ConvexWindow.box(lo, up1), gs[0]), (ConvexWindow.box(lo2, hi), gs[1])],
                         ScaledL1(b, d))


def face_distances(D: GridMetric):
    """D(H_i, H_i') for each axis: least distance between samples on opposite faces of a box window."""
    out = []
    for i in range(D.d):
        s = np.flatnonzero(np.abs(D.points[:, i] - D.window.lower[i]) < 1e-9)
        t = np.flatnonzero(np.abs(D.points[:, i] - D.window.upper[i]) < 1e-9)
        out.append(float(D.values[np.ix_(s, t)].min()))
    return np.array(out)


def separate_convexity_certificate(zeta, zeta_alt, theta, model, axis=0, m=16):
    """Evaluate the two-slab witness of the separate convexity of the crossing rate.

    Returns the combined crossing vector, the exact integral of the witness
    field, the convex combination of the two crossing rates, the witness's
    measured face distances and the crossing rate at the combined vector.
    """
    from .metric import prescribe_metric

    zeta = np.asarray(zeta, dtype=float)
    zeta_alt = np.asarray(zeta_alt, dtype=float)
    mixed = zeta.copy()
    mixed[axis] = theta * zeta[axis] + (1 - theta) * zeta_alt[axis]
    fld = two_slab_field(zeta, zeta_alt, theta, axis, a=model.a)
    integral = integral_rate(fld, model, k=m).value
    combo = theta * crossing_rate(zeta, model) + (1 - theta) * crossing_rate(zeta_alt, model)
    witness = prescribe_metric(fld, m)
    faces = face_distances(witness)
    return {
        "mixed": mixed,
        "integral": integral,
        "combination": combo,
        "identity_gap": abs(integral - combo) if math.isfinite(combo) else (0.0 if math.isinf(integral) else math.inf),
        "face_distances": faces,
        "crossing_rate_mixed": crossing_rate(mixed, model),
    }


# ---------------------------------------------------------------------------
# Point-to-point rate
# ---------------------------------------------------------------------------


def _tile_seminorm(c, w, d):
    return ScaledL1(c, d) if w <= c else MaxSeminorm([ScaledL1(c, d), WeightedLinf([w] * d)])


class _FieldDistance:
    """Single-pair distances of piecewise-constant tiled fields on a fixed fine grid."""

    def __init__(self, window, k, m, x, radius=2):
        self.window, self.k, self.m = window, k, m
        fine, lattice, _, _ = _fine_to_output(window, m, m)
        self.src, self.dst = _stencil_arcs(lattice, radius)
        self.n_nodes = len(fine)
        steps = fine[self.dst] - fine[self.src]
        mids = 0.5 * (fine[self.src] + fine[self.dst])
        self.l1 = np.abs(steps).sum(axis=1)
        self.linf = np.abs(steps).max(axis=1)
        side = (window.upper - window.lower) / k
        d = window.d
        # an arc takes the cheapest tile containing both ends; arcs in no closed tile cost b|.|_1
        rel_s = (fine[self.src] - window.lower) / side
        rel_d = (fine[self.dst] - window.lower) / side
        base = np.floor(np.minimum(rel_s, rel_d) + 1e-9).astype(int)
        arc_ids, tile_ids = [], []
        for off in itertools.product((0, -1), repeat=d):
            t = base + np.array(off)
            ok = np.all((t >= 0) & (t < k), axis=1)
            ok &= np.all((rel_s >= t - 1e-9) & (rel_s <= t + 1 + 1e-9) & (rel_d >= t - 1e-9) & (rel_d <= t + 1 + 1e-9), axis=1)
            arc_ids.append(np.flatnonzero(ok))
            tile_ids.append(np.ravel_multi_index(np.clip(t[ok], 0, k - 1).T, (k,) * d))
        self.pair_arc = np.concatenate(arc_ids)
        self.pair_tile = np.concatenate(tile_ids)
        self.orphan = np.ones(len(self.src), dtype=bool)
        self.orphan[self.pair_arc] = False
        self.source = int(np.argmin(np.abs(fine).sum(axis=1)))
        self.target = int(np.argmin(np.abs(fine - x).sum(axis=1)))
        if np.abs(fine[self.source]).sum() > 1e-9 or np.abs(fine[self.target] - x).sum() > 1e-9:
            raise InvalidInput("0 and x must be points of the fine grid")

    def distance(self, c, w, b):
        pc = np.maximum(c[self.pair_tile] * self.l1[self.pair_arc], w[self.pair_tile] * self.linf[self.pair_arc])
        cost = np.full(len(self.src), np.inf)
        np.minimum.at(cost, self.pair_arc, pc)
        cost[self.orphan] = b * self.l1[self.orphan]
        n = self.n_nodes
        mat = csr_matrix((np.concatenate([cost, cost]),
                          (np.concatenate([self.src, self.dst]), np.concatenate([self.dst, self.src]))), shape=(n, n))
        return float(dijkstra(mat, indices=self.source)[self.target])


@dataclass
class PointPointResult:
    value: float
    witness: GradientField
    margin: float
    trivial_value: float
    evaluations: int
    params: tuple = field(repr=False, default=None)


def point_point_rate(x, zeta: float, model: ElementaryCostModel, k: int = 4, per_tile: int = 4,
                     levels: int = 5, budget: int = 400, seed: int = 0, start=None) -> PointPointResult:
    """Upper bound on min {I(D) : D(0, x) >= zeta} over tiled fields max(c_t |.|_1, w_t |.|_inf).

    Coordinate descent from a feasible start (by default the constant field
    (zeta / |x|_1) |.|_1): each tile in turn takes the cheapest candidate
    (c, w) keeping the constraint, judged on the fine stencil grid.
    """
    x = np.asarray(x, dtype=float)
    d = len(x)
    a, b = model.a, model.b
    L = float(np.abs(x).sum())
    if L <= 0:
        raise InvalidInput("x must be nonzero")
    if zeta > b * L + 1e-12:
        raise InvalidInput(f"zeta = {zeta} exceeds b|x|_1 = {b * L}")
    if zeta < a * L - 1e-12:
        raise InvalidInput(f"zeta = {zeta} is below a|x|_1 = {a * L}")
    C = b * L / a if a > 0 else b * L
    window = ConvexWindow.cube(d, -C, C)
    m = k * per_tile / (2 * C)
    if abs(m - round(m)) > 1e-9 or np.any(np.abs(x * m - np.rint(x * m)) > 1e-9):
        raise InvalidInput("tiles and x must align with a fine grid of spacing 1/m, m integer; adjust k or per_tile")
    fd = _FieldDistance(window, k, int(round(m)), x)
    K = k ** d
    vol = (2 * C / k) ** d
    ladder = np.linspace(a, b, levels)
    cands = sorted({(float(c), 0.0) for c in ladder} | {(a, float(w)) for w in ladder if w > a})
    cand_cost = np.array([model(_tile_seminorm(c, w, d)) for c, w in cands])
    order = np.argsort(cand_cost, kind="stable")
    c0 = min(b, max(a, zeta / L))
    trivial = K * vol * model(ScaledL1(c0, d))
    if start is None:
        c = np.full(K, c0)
        w = np.zeros(K)
    else:
        c, w = (np.array(t, dtype=float) for t in start)
    cur = np.array([model(_tile_seminorm(ci, wi, d)) for ci, wi in zip(c, w)])
    evals = 0
    if fd.distance(c, w, b) < zeta - 1e-9:
        raise InvalidInput("starting field violates the constraint")
    rng = np.random.default_rng(seed)
    improved = True
    while improved and evals < budget:
        improved = False
        for t in rng.permutation(K):
            for j in order:
                if cand_cost[j] >= cur[t] - 1e-15 or evals >= budget:
                    break
                c_new, w_new = c.copy(), w.copy()
                c_new[t], w_new[t] = cands[j]
                evals += 1
                if fd.distance(c_new, w_new, b) >= zeta - 1e-9:
                    c, w = c_new, w_new
                    cur[t] = cand_cost[j]
                    improved = True
                    break
    value = float(vol * cur.sum()) if np.all(np.isfinite(cur)) else math.inf
    side = 2 * C / k
    regions = []
    for t in range(K):
        v = np.array(np.unravel_index(t, (k,) * d))
        lo = -C + v * side
        regions.append((ConvexWindow.box(lo, lo + side), _tile_seminorm(c[t], w[t], d)))
    witness = GradientField(window, regions, ScaledL1(b, d), tiling=k)
    margin = fd.distance(c, w, b) - zeta
    return PointPointResult(value, witness, margin, trivial, evals, (c, w))


def point_point_curve(x, zetas, model, **kw):
    """Values for increasing zetas; each level restarts from the witness of the next larger level."""
    zetas = sorted(float(z) for z in zetas)
    results = {}
    prev = None
    for z in reversed(zetas):
        res = point_point_rate(x, z, model, start=prev, **kw)
        if prev is not None:
            fresh = point_point_rate(x, z, model, **kw)
            if fresh.value < res.value:
                res = fresh
        results[z] = res
        prev = res.params
    return [(z, results[z]) for z in zetas]


def rate_curve_csv(curve) -> str:
    lines = ["# schema: zeta,value ; zeta in rescaled time units, value in rate units (per unit volume)",
             "zeta,value"]
    lines += [f"{z!r},{r.value!r}" for z, r in curve]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Symmetrization and the ball map
# ---------------------------------------------------------------------------


def reflect_metric(D: GridMetric, axes) -> GridMetric:
    """Mirror image of D through the centre of its box window along the given axes."""
    if not D.window.is_box:
        raise InvalidInput("reflection needs a box window")
    flip = np.zeros(D.d, dtype=bool)
    flip[list(axes)] = True
    mid2 = D.window.lower + D.window.upper
    pts = np.where(flip, mid2 - D.points, D.points)
    origin = np.where(flip, mid2 - D.origin, D.origin)
    return GridMetric(D.window, pts, D.values.copy(), D.a, D.b, spacing=D.spacing, origin=origin,
                      meta={**D.meta, "reflected": list(map(int, np.flatnonzero(flip)))})


def symmetrize(D: GridMetric, radius: int = 2) -> GridMetric:
    """Stitch of the 2^d half-scale copies of D, each reflected so that they mirror each other across the midplanes."""
    d = D.d
    unit = ConvexWindow.cube(d)
    if not D.window.same_as(unit):
        raise InvalidInput("symmetrize needs a metric on [0,1]^d")
    k = int(round(D.k))
    if abs(D.k - k) > 1e-9 or k % 2:
        raise InvalidInput("symmetrize needs an even grid resolution")
    half = scale_metric(D, 0.5)
    pieces = []
    for eps in np.ndindex(*(2,) * d):
        eps = np.array(eps)
        piece = reflect_metric(half, np.flatnonzero(eps)) if eps.any() else half
        piece = translate_metric(piece, eps * 0.5)
        pieces.append((piece.window, piece))
    return stitch_metrics(pieces, unit, 2 * k, k, b=D.b, radius=radius)


def ball_map(D: GridMetric, t: float = 1.0) -> np.ndarray:
    """Sample points x with D(0, x) <= t."""
    i = D.index_of(np.zeros(D.d))
    if i is None:
        raise InvalidInput("0 must be a sample point of the metric")
    return D.points[D.values[i] <= t + 1e-12]


def ball_distance(D1: GridMetric, D2: GridMetric, t: float = 1.0) -> float:
    return hausdorff(ball_map(D1, t), ball_map(D2, t))
