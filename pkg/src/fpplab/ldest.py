"""Large-deviation events, probability estimation and rate sequences.

Events are evaluated on finite samples: an LD event compares the rescaled
metric with its target at the k-grid points of the window only.  The sampled
event is implied by the event over all pairs with tolerance eps and implies
the event over all pairs with tolerance eps + grid_slack; the slack is
reported with every estimate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.csgraph import dijkstra

from .geometry import ConvexWindow
from .lattice import (BoundedLaw, InvalidInput, LatticeBox, WeightConfiguration, sample_configuration,
                      sample_weight_matrix)
from .metric import GridMetric, Seminorm, l1_sphere_directions
from .passage import (continuous_passage_time, covering_box, crossing_times, lattice_graph,
                      localization_box, rescaled_metric)

ENUMERATION_BUDGET_BITS = 24


class BudgetExceeded(RuntimeError):
    """The requested computation exceeds the configured size budget."""


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


@dataclass
class LDEvent:
    """{rescaled metric close to target}: two-sided (|D' - D| <= eps) or lower (D' >= D - eps)."""

    window: ConvexWindow
    n: int
    target: object          # Seminorm or GridMetric on the k-grid of the window
    eps: float
    flavor: str = "two-sided"
    k: int | None = None

    def __post_init__(self):
        if self.eps <= 0:
            raise InvalidInput("tolerance must be positive")
        if self.flavor not in ("two-sided", "lower"):
            raise InvalidInput("flavor must be 'two-sided' or 'lower'")
        if self.k is None:
            self.k = self.n
        self._target_values = None

    @property
    def d(self):
        return self.window.d

    def box(self) -> LatticeBox:
        return covering_box(self.window, self.n)

    def grid_slack(self, law_b):
        """Bound on how far the sampled event can miss pairs between samples: (b + b_target) d / k."""
        tb = self.target.b if isinstance(self.target, GridMetric) else self.target.envelope()[1]
        return (law_b + tb) * self.d / self.k

    def target_values(self):
        if self._target_values is None:
            pts = self.window.grid_points(self.k)
            if isinstance(self.target, GridMetric):
                if self.target.points.shape != pts.shape or not np.allclose(self.target.points, pts):
                    raise InvalidInput("target GridMetric must live on the event's k-grid")
                self._target_values = self.target.values
            else:
                self._target_values = self.target(pts[:, None, :] - pts[None, :, :])
        return self._target_values

    def with_target(self, target):
        return LDEvent(self.window, self.n, target, self.eps, self.flavor, self.k)

    def lower(self):
        return LDEvent(self.window, self.n, self.target, self.eps, "lower", self.k)

    def indicator(self, config: WeightConfiguration) -> bool:
        V = _rescaled_values(config, self.window, self.n, self.k)
        T = self.target_values()
        if self.flavor == "lower":
            return bool(np.all(V >= T - self.eps))
        return bool(np.all(np.abs(V - T) <= self.eps))

    def describe(self):
        return f"LD[{self.flavor}] n={self.n} k={self.k} eps={self.eps} target={self.target!r}"


@dataclass
class CrossingEvent:
    """{rescaled crossing time of [0, n]^d along axis i >= lower_i (and <= upper_i)}; None skips an axis."""

    n: int
    d: int
    lower: tuple = ()
    upper: tuple = ()

    def box(self) -> LatticeBox:
        return LatticeBox.cube(self.n, self.d)

    def indicator(self, config: WeightConfiguration) -> bool:
        t = crossing_times(config, self.n).times
        for i, lo in enumerate(self.lower):
            if lo is not None and t[i] < lo:
                return False
        for i, hi in enumerate(self.upper):
            if hi is not None and t[i] > hi:
                return False
        return True

    def grid_slack(self, law_b):
        return 0.0

    def describe(self):
        return f"crossing n={self.n} lower={self.lower} upper={self.upper}"


@dataclass
class PointPointEvent:
    """{T(0, n x) / n >= zeta}."""

    x: tuple
    n: int
    zeta: float
    a: float
    b: float

    def box(self) -> LatticeBox:
        return localization_box(np.zeros(len(self.x)), self.n * np.asarray(self.x, dtype=float), self.a, self.b)

    def indicator(self, config: WeightConfiguration) -> bool:
        target = self.n * np.asarray(self.x, dtype=float)
        return continuous_passage_time(config, np.zeros(len(self.x)), target) / self.n >= self.zeta

    def grid_slack(self, law_b):
        return 0.0

    def describe(self):
        return f"point-point x={self.x} n={self.n} zeta={self.zeta}"


def _rescaled_values(config, window, n, k):
    """Sampled rescaled metric values; the lattice graph is used directly when samples are vertices."""
    box = covering_box(window, n)
    if (window.is_box and n % k == 0 and config.box == box
            and np.allclose(window.lower * n, box.lower) and np.allclose(window.upper * n, box.upper)):
        pts = np.rint(window.grid_points(k) * n).astype(np.int64)
        ids = np.array([box.vertex_index(p) for p in pts])
        dist = dijkstra(lattice_graph(config).matrix, indices=ids)[:, ids]
        dist = np.minimum(dist, dist.T)
        np.fill_diagonal(dist, 0.0)
        return dist / n
    return rescaled_metric(config, window, n, k).values


def event_indicator(config: WeightConfiguration, event) -> bool:
    return event.indicator(config)


def event_box(event) -> LatticeBox:
    return event.box()


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------


def wilson_interval(hits, trials, z=1.959963984540054):
    if trials <= 0:
        return 0.0, 1.0
    p = hits / trials
    if hits == 0:
        # one-sided: only the upper end carries information
        z2 = z * z
        return 0.0, z2 / (trials + z2)
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class RateEstimate:
    n: int
    d: int
    event: str
    method: str               # exact | crude | tilted
    trials: int
    hits: int
    p_hat: float
    ci: tuple
    stderr: float = 0.0
    exact: bool = False
    lr_mean: float | None = None
    lr_var: float | None = None
    grid_slack: float = 0.0
    theta: float = 0.0

    @property
    def zero_hits(self):
        return self.p_hat <= 0.0

    @property
    def rate(self):
        """-log(p_hat) / n^d; with zero hits, the rule-of-three lower bound."""
        if self.p_hat > 0:
            return max(0.0, -math.log(min(self.p_hat, 1.0)) / self.n ** self.d)
        if self.exact:
            return math.inf
        return -math.log(3.0 / self.trials) / self.n ** self.d

    @property
    def rate_is_lower_bound(self):
        return self.zero_hits and not self.exact

    def rate_interval(self):
        lo, hi = self.ci
        r = lambda p: math.inf if p <= 0 else max(0.0, -math.log(min(p, 1.0)) / self.n ** self.d)
        return r(hi), r(lo)

    def csv_row(self):
        return [self.n, self.hits, self.trials, self.p_hat, self.ci[0], self.ci[1], self.rate]

    def summary(self):
        return {"n": self.n, "d": self.d, "event": self.event, "method": self.method, "trials": self.trials,
                "hits": self.hits, "p_hat": self.p_hat, "ci": list(self.ci), "stderr": self.stderr,
                "rate": self.rate, "rate_is_lower_bound": self.rate_is_lower_bound, "exact": self.exact,
                "lr_mean": self.lr_mean, "lr_var": self.lr_var, "grid_slack": self.grid_slack, "theta": self.theta}


RATE_CSV_COLUMNS = ["n", "hits", "trials", "p_hat", "ci_lo", "ci_hi", "rate"]


def _memo_for(event):
    memo = getattr(event, "_memo", None)
    if memo is None:
        memo = {}
        try:
            event._memo = memo
        except AttributeError:
            pass
    return memo


def _cached_indicator(event, config, memo):
    if memo is None:
        return event.indicator(config)
    key = config.weights.tobytes()
    hit = memo.get(key)
    if hit is None:
        hit = event.indicator(config)
        memo[key] = hit
    return hit


def _event_dims(event):
    box = event.box()
    return event.n, box.d


def exact_probability(event, law: BoundedLaw) -> RateEstimate:
    """Probability by weighted enumeration of all atomic configurations of the event's box."""
    if not law.is_discrete:
        raise InvalidInput("exact enumeration needs an atomic law")
    box = event.box()
    atoms = np.array([v for v, _ in law.atoms])
    masses = np.array([m for _, m in law.atoms])
    E = box.num_edges
    bits = E * math.log2(len(atoms)) if len(atoms) > 1 else 0.0
    if bits > ENUMERATION_BUDGET_BITS:
        raise BudgetExceeded(f"enumeration needs {bits:.1f} bits (> {ENUMERATION_BUDGET_BITS}): "
                             f"{len(atoms)}^{E} configurations")
    memo = _memo_for(event)
    total = 0.0
    hits = 0
    count = len(atoms) ** E
    digits = np.zeros(E, dtype=np.int64)
    for code in range(count):
        c = code
        for e in range(E - 1, -1, -1):
            digits[e] = c % len(atoms)
            c //= len(atoms)
        config = WeightConfiguration(box, atoms[digits], law)
        if _cached_indicator(event, config, memo):
            total += float(np.prod(masses[digits]))
            hits += 1
    n, d = _event_dims(event)
    return RateEstimate(n, d, event.describe(), "exact", count, hits, total, (total, total), 0.0, True,
                        grid_slack=event.grid_slack(law.b))


def default_tilt(law: BoundedLaw, num_edges: int) -> float:
    """Tilt giving the top atom mass 1 - 1/num_edges (all-b configurations become typical)."""
    if not law.is_discrete or len(law.atoms) < 2:
        return 0.0
    target = 1.0 - 1.0 / max(num_edges, 2)
    if law.mass_at(law.b) >= target:
        return 0.0
    f = lambda th: law.tilted(th).mass_at(law.b) - target
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    return float(brentq(f, 0.0, hi, xtol=1e-12))


def estimate_probability(law: BoundedLaw, event, trials: int, tilt: float = 0.0, seed: int = 0,
                         threads: int = 1, memoize: bool | None = None) -> RateEstimate:
    """Monte Carlo estimate of P(event); with tilt theta, importance sampling from the tilted law.

    Trial i uses stream i of the master seed; the result does not depend on
    ``threads``.
    """
    if trials < 1:
        raise InvalidInput("need at least one trial")
    box = event.box()
    tilt = float(tilt)
    proposal = law if tilt == 0.0 else law.tilted(tilt)
    if memoize is None:
        memoize = law.is_discrete
    memo = _memo_for(event) if memoize else None
    W = sample_weight_matrix(box, proposal, seed, np.arange(trials))

    def run(chunk):
        return [_cached_indicator(event, WeightConfiguration(box, W[i], law), memo) for i in chunk]

    chunks = np.array_split(np.arange(trials), max(1, threads * 4))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    ind = np.array([h for part in parts for h in part], dtype=bool)
    hits = int(ind.sum())
    n, d = _event_dims(event)
    slack = event.grid_slack(law.b)
    if tilt == 0.0:
        p = hits / trials
        return RateEstimate(n, d, event.describe(), "crude", trials, hits, p, wilson_interval(hits, trials),
                            math.sqrt(p * (1 - p) / trials), grid_slack=slack)
    E = box.num_edges
    log_lr = E * law.log_normalizer(tilt) - tilt * W.sum(axis=1)
    lr = np.exp(log_lr)
    vals = np.where(ind, lr, 0.0)
    p = float(vals.mean())
    sd = float(vals.std(ddof=1)) if trials > 1 else 0.0
    se = sd / math.sqrt(trials)
    z = 1.959963984540054
    ci = (max(0.0, p - z * se), p + z * se)
    if hits == 0:
        ci = (0.0, float(3.0 / trials * lr.max()))
    return RateEstimate(n, d, event.describe(), "tilted", trials, hits, p, ci, se, False,
                        float(lr.mean()), float(lr.var()), slack, tilt)


# ---------------------------------------------------------------------------
# Rate sequences and experiments
# ---------------------------------------------------------------------------


def elementary_event(g: Seminorm, eps: float, n: int, d: int, flavor="lower", k=None) -> LDEvent:
    return LDEvent(ConvexWindow.cube(d), n, g, eps, flavor, k)


def elementary_rate_sequence(g: Seminorm, eps: float, n_list, law: BoundedLaw, trials: int, tilt="auto",
                             seed: int = 0, exact: bool = False, flavor: str = "lower", threads: int = 1):
    """Rates of LD+_{n,[0,1]^d}(g, eps) (or the two-sided event) for each n."""
    lo, hi = g.envelope()
    if lo < law.a - 1e-12 or hi > law.b + 1e-12:
        raise InvalidInput("g must satisfy a|.|_1 <= g <= b|.|_1")
    out = []
    for n in n_list:
        event = elementary_event(g, eps, n, g_dim(g), flavor)
        if exact:
            try:
                out.append(exact_probability(event, law))
                continue
            except BudgetExceeded:
                pass
        theta = default_tilt(law, event.box().num_edges) if tilt == "auto" else float(tilt)
        out.append(estimate_probability(law, event, trials, theta, seed, threads))
    return out


def g_dim(g: Seminorm):
    d = getattr(g, "d", None)
    if d is None:
        raise InvalidInput("seminorm does not expose its dimension")
    return d


def kesten_bound(law: BoundedLaw, zeta: float, d: int) -> float:
    """-d log nu([zeta, b]): the all-slow-edges bound on the elementary rate of zeta |.|_1."""
    m = law.mass_above(zeta)
    return math.inf if m <= 0 else -d * math.log(m)


def assembly_layout(n: int, k: int, delta: float, d: int):
    """Tile offsets (lattice units) and the scale m = ceil(n k (1 + delta))."""
    step = int(math.floor(n * (1 + delta) + 1e-12))
    m = int(math.ceil(n * k * (1 + delta) - 1e-12))
    offsets = [tuple(step * np.array(v)) for v in np.ndindex(*(k,) * d)]
    return m, step, offsets


def assembly_tolerance_constant(b: float, d: int) -> float:
    """C with C (eps + delta) >= 4d(eps + delta) and >= 2d(6b + bd + delta) delta for delta <= 1."""
    return max(4.0 * d, 2.0 * d * (6 * b + b * d + 1.0))


def _tile_samples(law, g, delta, n, d, count, seed, tilt, max_attempts):
    """Draw ``count`` tile configurations on [0, n]^d satisfying LD+(g, delta^2)."""
    event = elementary_event(g, delta ** 2, n, d, "lower")
    box = event.box()
    proposal = law if tilt == 0 else law.tilted(tilt)
    out = []
    stream = 0
    while len(out) < count:
        if stream >= max_attempts:
            raise BudgetExceeded(f"only {len(out)} of {count} LD+ tiles found in {max_attempts} proposals")
        w = sample_weight_matrix(box, proposal, seed, [stream])[0]
        stream += 1
        cfg = WeightConfiguration(box, w, law)
        if _cached_indicator(event, cfg, _memo_for(event) if law.is_discrete else None):
            out.append(w)
    return out, stream


def assemble_configuration(law, tile_weights, n, k, delta, d, corridor_weights):
    """Configuration on [0, m]^d with the given tiles at their offsets and corridor weights elsewhere."""
    m, step, offsets = assembly_layout(n, k, delta, d)
    box = LatticeBox.cube(m, d)
    tile_box = LatticeBox.cube(n, d)
    tbase, taxis, _, _ = tile_box.edges()
    lookup = box.edge_lookup()
    w = np.array(corridor_weights, dtype=float)
    in_tile = np.zeros(box.num_edges, dtype=bool)
    for off, tw in zip(offsets, tile_weights):
        idx = [lookup[(tuple(int(c) for c in np.asarray(b) + off), int(a))] for b, a in zip(tbase, taxis)]
        w[idx] = tw
        in_tile[idx] = True
    return WeightConfiguration(box, w, law), in_tile, offsets, m


def subadditive_assembly_check(g: Seminorm, eps: float, delta: float, n: int, k: int, law: BoundedLaw,
                               trials: int, seed: int = 0, tilt="auto", rate_trials: int | None = None,
                               max_cells: int = 40000, max_attempts: int = 200000):
    """Constructive half of the subadditivity step, checked sample by sample.

    Each sample assembles k^d tiles satisfying LD+(g, delta^2) at scale n,
    placed floor(n(1+delta)) apart in [0, m]^d, with every other edge drawn
    from the law conditioned on [b - eps, b].  The report lists, per sample,
    whether the assembled configuration satisfies LD(g, C(eps+delta)) at
    scale m, the observed lower and upper deviations and the corridor-lemma
    certificate.
    """
    d = g_dim(g)
    if not 0 < delta <= 1:
        raise InvalidInput("delta must lie in (0, 1]")
    if not 0 < eps < law.b / 2:
        raise InvalidInput("need 0 < eps < b/2")
    m, step, offsets = assembly_layout(n, k, delta, d)
    if (m + 1) ** d > max_cells:
        raise BudgetExceeded(f"scale m={m} exceeds the budget of {max_cells} sample points")
    if step < n + 1:
        raise InvalidInput("delta too small: tiles would share edges")
    b = law.b
    C = assembly_tolerance_constant(b, d)
    tol = C * (eps + delta)
    corridor_law = law.conditioned_above(b - eps)
    theta = default_tilt(law, LatticeBox.cube(n, d).num_edges) if tilt == "auto" else float(tilt)
    tiles, proposals = _tile_samples(law, g, delta, n, d, trials * k ** d, seed, theta, max_attempts)
    window = ConvexWindow.cube(d)
    pts = window.grid_points(m)
    G = g(pts[:, None, :] - pts[None, :, :])
    gap = step - n
    delta1 = gap / m
    delta2 = n * delta ** 2 / m
    corridor_bound = 3.0 * window.diameter * (eps + delta2 / delta1)
    samples = []
    for s in range(trials):
        cw = sample_configuration(LatticeBox.cube(m, d), corridor_law, seed + 1, s).weights
        cfg, in_tile, _, _ = assemble_configuration(law, tiles[s * k ** d:(s + 1) * k ** d], n, k, delta, d, cw)
        corridor_ok = bool(np.all(cfg.weights[~in_tile] >= b - eps))
        V = _rescaled_values(cfg, window, m, m)
        dev = V - G
        samples.append({
            "sample": s,
            "lower_dev": float(-dev.min()),
            "upper_dev": float(dev.max()),
            "ld_ok": bool(np.abs(dev).max() <= tol),
            "corridor_ok": corridor_ok,
            "corridor_bound_ok": bool(dev.min() >= -corridor_bound - 1e-12),
        })
    report = {
        "m": m, "n": n, "k": k, "d": d, "eps": eps, "delta": delta, "C": C, "tolerance": tol,
        "corridor_bound": corridor_bound, "delta1": delta1, "delta2": delta2,
        "tile_proposals": proposals, "tilt": theta,
        "samples": samples,
        "all_ld": all(r["ld_ok"] for r in samples),
        "all_corridor": all(r["corridor_bound_ok"] and r["corridor_ok"] for r in samples),
        "max_lower_dev": max(r["lower_dev"] for r in samples),
        "max_upper_dev": max(r["upper_dev"] for r in samples),
        "corridor_cost": -C * delta * math.log(law.mass_above(b - eps)),
    }
    if rate_trials:
        tile_rate = estimate_probability(law, elementary_event(g, delta ** 2, n, d, "lower"), rate_trials,
                                         theta, seed + 2)
        corridor_edges = LatticeBox.cube(m, d).num_edges - k ** d * LatticeBox.cube(n, d).num_edges
        log_corr = math.log(law.mass_above(b - eps))
        # -m^-d log P(favourable event), exact given the tile probability
        fav = (-(k / m) ** d * math.log(tile_rate.p_hat) if tile_rate.p_hat > 0 else math.inf) \
            - corridor_edges / m ** d * log_corr
        report["rate_n"] = tile_rate.rate
        report["rate_n_lower_bound"] = tile_rate.rate_is_lower_bound
        report["rate_favourable"] = fav
        report["rhs"] = tile_rate.rate + report["corridor_cost"]
        report["margin"] = report["rhs"] - fav
    return report


@dataclass
class TimeConstantEstimate:
    x: tuple
    n_list: list
    means: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    replicas: int
    law: str
    samples: np.ndarray = field(repr=False, default=None)

    def rows(self):
        return [[n, float(m), float(lo), float(hi), self.replicas]
                for n, m, lo, hi in zip(self.n_list, self.means, self.ci_lo, self.ci_hi)]


TIME_CONSTANT_COLUMNS = ["n", "mu_hat", "ci_lo", "ci_hi", "replicas"]


def time_constant(law: BoundedLaw, x, n_list, replicas: int, seed: int = 0, subcritical: bool = False,
                  threads: int = 1) -> TimeConstantEstimate:
    """Mean of T(0, n x) / n over replicas for each n, with a 95% normal interval.

    Replica r uses stream r at every n and under every law, so the estimates
    are coupled across n and across stochastically ordered laws.
    """
    x = np.asarray(x, dtype=float)
    if law.a <= 0 and not subcritical:
        raise InvalidInput("a = 0 needs the law declared subcritical")
    if replicas < 1:
        raise InvalidInput("need at least one replica")
    a_eff = law.a if law.a > 0 else law.b
    out = np.zeros((len(n_list), replicas))

    def one(job):
        i, r = job
        n = n_list[i]
        target = n * x
        box = localization_box(np.zeros_like(x), target, a_eff, law.b) if law.a > 0 else \
            LatticeBox(tuple(np.floor(np.minimum(0, target)).astype(int) - 2 * n),
                       tuple(np.ceil(np.maximum(0, target)).astype(int) + 2 * n))
        cfg = sample_configuration(box, law, seed, r)
        return continuous_passage_time(cfg, np.zeros_like(x), target) / n

    jobs = [(i, r) for i in range(len(n_list)) for r in range(replicas)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, jobs))
    else:
        vals = [one(j) for j in jobs]
    for (i, r), v in zip(jobs, vals):
        out[i, r] = v
    means = out.mean(axis=1)
    se = out.std(axis=1, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.zeros(len(n_list))
    return TimeConstantEstimate(tuple(x.tolist()), list(n_list), means, means - 1.96 * se, means + 1.96 * se,
                                replicas, law.describe(), out)


def _touches_top(g: Seminorm, b: float, d: int, tol=1e-9):
    dirs = l1_sphere_directions(d)
    return bool(np.any(g(dirs) >= b * np.abs(dirs).sum(axis=1) - tol))


def rate_zero_region_probe(g: Seminorm, law: BoundedLaw, mu_directions=None, mu_values=None, n: int = 16,
                           replicas: int = 8, seed: int = 0, check_trials: int = 0, eps: float = 0.25):
    """Classify g: rate zero (g <= mu), positive and finite, or infinite (g touches b|.|_1 with nu({b}) = 0).

    ``mu_values`` are time-constant estimates in ``mu_directions``; when absent
    they are estimated at scale n.  The zero verdict uses the upper ends of the
    confidence intervals.  With ``check_trials`` the verdict is compared with
    the trend of elementary-rate estimates at n and 2n.
    """
    d = g_dim(g)
    a, b = law.a, law.b
    lo, hi = g.envelope()
    report = {"g": repr(g), "law": law.describe()}
    if _touches_top(g, b, d) and law.mass_at(b) <= 0:
        report.update(verdict="infinite", reason="g touches b|.|_1 and nu({b}) = 0")
        return report
    if hi <= a + 1e-12:
        report.update(verdict="zero", reason="g <= a|.|_1 <= mu")
        return report
    if mu_values is None:
        mu_directions = l1_sphere_directions(d, 8 if d == 2 else 26)
        mu_values, mu_hi = [], []
        for u in mu_directions:
            est = time_constant(law, u, [n], replicas, seed, subcritical=True)
            mu_values.append(float(est.means[0]))
            mu_hi.append(float(est.ci_hi[0]))
        mu_values, mu_hi = np.array(mu_values), np.array(mu_hi)
    else:
        mu_values = np.asarray(mu_values, dtype=float)
        mu_hi = mu_values
        mu_directions = np.asarray(mu_directions, dtype=float)
    gv = g(mu_directions)
    report["mu_directions"] = np.asarray(mu_directions).tolist()
    report["mu_hat"] = mu_values.tolist()
    report["g_values"] = gv.tolist()
    if np.all(gv <= mu_hi + 1e-12):
        report.update(verdict="zero", reason="g <= mu_hat on the sampled directions")
    else:
        bound = kesten_bound(law, hi, d)
        report.update(verdict="positive", reason="g exceeds mu_hat in some direction", upper_bound=bound)
    if check_trials:
        seq = elementary_rate_sequence(g, eps, [max(2, n // 4), max(2, n // 2)], law, check_trials, seed=seed)
        rates = [r.rate for r in seq]
        report["rate_trend"] = rates
        report["trend_consistent"] = (rates[-1] <= rates[0] + 0.5) if report["verdict"] == "zero" else rates[-1] > 0
    return report
