"""Lattice boxes of Z^d, bounded edge-weight laws and reproducible weight sampling."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np


class InvalidInput(ValueError):
    """Raised when an operation receives arguments outside its contract."""


# ---------------------------------------------------------------------------
# Boxes and edges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeBox:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lower)
        hi = tuple(int(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise InvalidInput("box corners must have the same positive length")
        if any(h < l for l, h in zip(lo, hi)):
            raise InvalidInput(f"degenerate box: upper {hi} below lower {lo}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n, d, lower=0):
        return cls((lower,) * d, (lower + n,) * d)

    @property
    def d(self):
        return len(self.lower)

    @property
    def shape(self):
        return tuple(h - l + 1 for l, h in zip(self.lower, self.upper))

    @property
    def num_vertices(self):
        return int(np.prod(self.shape))

    @property
    def num_edges(self):
        return len(self.edges()[1])

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def contains_box(self, other: "LatticeBox") -> bool:
        return self.contains(other.lower) and self.contains(other.upper)

    def vertices(self):
        """All vertices as an (N, d) int array in lexicographic (row-major) order."""
        grids = np.indices(self.shape).reshape(self.d, -1).T
        return grids + np.asarray(self.lower)

    def vertex_index(self, x):
        """Row-major index of vertex (or array of vertices) x."""
        x = np.asarray(x, dtype=np.int64) - np.asarray(self.lower)
        return np.ravel_multi_index(tuple(np.moveaxis(x, -1, 0)), self.shape)

    def edges(self):
        """Canonical edge list.

        Returns (base, axis, u, v): lower endpoint coordinates, axis index and
        the row-major indices of both endpoints.  Edges are ordered
        lexicographically on (lower endpoint, axis).
        """
        cache = self.__dict__.get("_edge_cache")
        if cache is not None:
            return cache
        verts = self.vertices()
        n = len(verts)
        d = self.d
        upper = np.asarray(self.upper)
        base = np.repeat(verts, d, axis=0)
        axis = np.tile(np.arange(d), n)
        ok = base[np.arange(len(base)), axis] < upper[axis]
        base, axis = base[ok], axis[ok]
        u = self.vertex_index(base)
        strides = np.array([int(np.prod(self.shape[i + 1:])) for i in range(d)])
        v = u + strides[axis]
        cache = (base, axis, u, v)
        object.__setattr__(self, "_edge_cache", cache)
        return cache

    def edge_table(self):
        """(num_vertices, d) array: index of the edge leaving each vertex along each axis, -1 if none."""
        cache = self.__dict__.get("_table_cache")
        if cache is None:
            _, axis, u, _ = self.edges()
            cache = np.full((self.num_vertices, self.d), -1, dtype=np.int64)
            cache[u, axis] = np.arange(len(u))
            object.__setattr__(self, "_table_cache", cache)
        return cache

    def edge_lookup(self):
        """Map (lower endpoint tuple, axis) -> canonical edge index."""
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            base, axis, _, _ = self.edges()
            cache = {(tuple(int(c) for c in b), int(a)): i for i, (b, a) in enumerate(zip(base, axis))}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def edge_index(self, p, q):
        """Index of the edge joining adjacent vertices p and q (None if absent)."""
        p = np.asarray(p, dtype=np.int64)
        q = np.asarray(q, dtype=np.int64)
        diff = q - p
        if np.abs(diff).sum() != 1:
            return None
        ax = int(np.flatnonzero(diff)[0])
        low = np.minimum(p, q)
        return self.edge_lookup().get((tuple(int(c) for c in low), ax))

    def __repr__(self):
        return f"LatticeBox(lower={self.lower}, upper={self.upper})"


# ---------------------------------------------------------------------------
# Laws
# ---------------------------------------------------------------------------

_ATOL = 1e-12


@dataclass(frozen=True)
class BoundedLaw:
    """A law on a bounded interval: finitely many atoms plus an optional uniform part.

    ``atoms`` is a tuple of (value, mass) pairs with distinct values; ``uniform``
    is None or a triple (lo, hi, mass) describing mass spread uniformly on
    [lo, hi].  Masses sum to one.
    """

    atoms: tuple = ()
    uniform: tuple | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        merged = {}
        for v, m in self.atoms:
            v, m = float(v), float(m)
            if m < 0:
                raise InvalidInput("negative atom mass")
            if m > 0:
                merged[v] = merged.get(v, 0.0) + m
        atoms = tuple(sorted(merged.items()))
        uni = self.uniform
        if uni is not None:
            lo, hi, m = (float(t) for t in uni)
            if m < 0 or hi < lo:
                raise InvalidInput("bad uniform component")
            if m == 0:
                uni = None
            elif hi == lo:
                atoms = tuple(sorted({**dict(atoms), lo: dict(atoms).get(lo, 0.0) + m}.items()))
                uni = None
            else:
                uni = (lo, hi, m)
        total = sum(m for _, m in atoms) + (uni[2] if uni else 0.0)
        if abs(total - 1.0) > 1e-9:
            raise InvalidInput(f"law masses sum to {total}, expected 1")
        values = [v for v, _ in atoms] + ([uni[0], uni[1]] if uni else [])
        if not values:
            raise InvalidInput("empty law")
        if min(values) < 0:
            raise InvalidInput("weights must be nonnegative")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "uniform", uni)

    # constructors -----------------------------------------------------
    @classmethod
    def dirac(cls, c):
        return cls(((c, 1.0),), name=f"dirac({_fmt(c)})")

    @classmethod
    def two_point(cls, a, b, p):
        if not b > a:
            raise InvalidInput("two-point law needs b > a")
        if not 0.0 <= p <= 1.0:
            raise InvalidInput("p must lie in [0, 1]")
        return cls(((a, 1.0 - p), (b, p)), name=f"two_point({_fmt(a)},{_fmt(b)},{_fmt(p)})")

    @classmethod
    def uniform_law(cls, a, b):
        if not b > a:
            raise InvalidInput("uniform law needs b > a")
        return cls((), (a, b, 1.0), name=f"uniform({_fmt(a)},{_fmt(b)})")

    @classmethod
    def discrete(cls, values, masses):
        masses = np.asarray(masses, dtype=float)
        if len(values) != len(masses):
            raise InvalidInput("values and masses differ in length")
        atoms = tuple(zip(values, masses / masses.sum()))
        return cls(atoms, name="discrete(" + ",".join(f"{_fmt(v)}:{_fmt(m)}" for v, m in atoms) + ")")

    # support ----------------------------------------------------------
    @property
    def a(self):
        vals = [v for v, _ in self.atoms] + ([self.uniform[0]] if self.uniform else [])
        return min(vals)

    @property
    def b(self):
        vals = [v for v, _ in self.atoms] + ([self.uniform[1]] if self.uniform else [])
        return max(vals)

    @property
    def is_discrete(self):
        return self.uniform is None

    def mass_at(self, t):
        return dict(self.atoms).get(float(t), 0.0)

    def mass_above(self, t):
        """nu([t, b])."""
        t = float(t)
        m = sum(mass for v, mass in self.atoms if v >= t)
        if self.uniform:
            lo, hi, um = self.uniform
            m += um * min(1.0, max(0.0, (hi - t) / (hi - lo)))
        return min(1.0, m)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for v, m in self.atoms:
            out = out + m * (t >= v)
        if self.uniform:
            lo, hi, um = self.uniform
            out = out + um * np.clip((t - lo) / (hi - lo), 0.0, 1.0)
        return np.minimum(out, 1.0)

    def mean(self):
        m = sum(v * p for v, p in self.atoms)
        if self.uniform:
            lo, hi, um = self.uniform
            m += um * 0.5 * (lo + hi)
        return m

    def variance(self):
        m2 = sum(v * v * p for v, p in self.atoms)
        if self.uniform:
            lo, hi, um = self.uniform
            m2 += um * (lo * lo + lo * hi + hi * hi) / 3.0
        return m2 - self.mean() ** 2

    def _breakpoints(self):
        pts = sorted({v for v, _ in self.atoms} | (set(self.uniform[:2]) if self.uniform else set()))
        pts = np.array(pts)
        right = self.cdf(pts)
        left = np.array([self.cdf(np.nextafter(p, -np.inf)) for p in pts])
        return pts, left, right

    def quantile(self, u):
        """Generalized inverse CDF; atom values are returned exactly."""
        u = np.asarray(u, dtype=float)
        pts, left, right = self._breakpoints()
        j = np.searchsorted(right, u, side="left")
        j = np.minimum(j, len(pts) - 1)
        out = pts[j].copy()
        if self.uniform:
            lo, hi, um = self.uniform
            slope = um / (hi - lo)
            # u falls in the linear stretch below breakpoint j
            lin = (u <= left[j]) & (j > 0)
            lin &= pts[np.maximum(j - 1, 0)] >= lo
            lin &= pts[j] <= hi
            if np.any(lin):
                jp = j[lin] - 1
                out[lin] = np.minimum(pts[jp] + (u[lin] - right[jp]) / slope, pts[j[lin]])
        return out

    # transforms -------------------------------------------------------
    def tilted(self, theta):
        """Exponentially tilted law d nu_theta ∝ e^{theta t} d nu (atomic laws only)."""
        if not self.is_discrete:
            raise InvalidInput("exponential tilting is implemented for atomic laws only")
        vals = np.array([v for v, _ in self.atoms])
        masses = np.array([m for _, m in self.atoms])
        w = masses * np.exp(theta * (vals - vals.max()))
        w /= w.sum()
        return BoundedLaw(tuple(zip(vals, w)), name=f"tilt({self.describe()},{_fmt(theta)})")

    def log_normalizer(self, theta):
        """log E[e^{theta tau}] for atomic laws."""
        vals = np.array([v for v, _ in self.atoms])
        masses = np.array([m for _, m in self.atoms])
        top = vals.max()
        return theta * top + np.log(np.sum(masses * np.exp(theta * (vals - top))))

    def conditioned_above(self, t):
        """The law conditioned on [t, b]."""
        mass = self.mass_above(t)
        if mass <= 0:
            raise InvalidInput(f"law gives no mass to [{t}, b]")
        atoms = tuple((v, m / mass) for v, m in self.atoms if v >= t)
        uni = None
        if self.uniform:
            lo, hi, um = self.uniform
            if hi > t:
                lo2 = max(lo, t)
                uni = (lo2, hi, um * (hi - lo2) / (hi - lo) / mass)
        return BoundedLaw(atoms, uni)

    def describe(self):
        if self.name:
            return self.name
        parts = [f"{_fmt(v)}:{_fmt(m)}" for v, m in self.atoms]
        text = "mixture(" + ",".join(parts)
        if self.uniform:
            lo, hi, m = self.uniform
            text += ("," if parts else "") + f"U[{_fmt(lo)},{_fmt(hi)}]:{_fmt(m)}"
        return text + ")"

    def __repr__(self):
        return f"BoundedLaw<{self.describe()}>"


def _fmt(x):
    return repr(float(x))


_LAW_RE = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


def parse_law(text: str) -> BoundedLaw:
    """Parse the textual law forms produced by BoundedLaw.describe()."""
    m = _LAW_RE.match(text)
    if not m:
        raise InvalidInput(f"cannot parse law {text!r}")
    kind, body = m.group(1), m.group(2)
    try:
        if kind == "dirac":
            return BoundedLaw.dirac(float(body))
        if kind in ("two_point", "twopoint"):
            a, b, p = (float(t) for t in body.split(","))
            return BoundedLaw.two_point(a, b, p)
        if kind == "uniform":
            a, b = (float(t) for t in body.split(","))
            return BoundedLaw.uniform_law(a, b)
        if kind == "discrete":
            pairs = [t.split(":") for t in body.split(",")]
            return BoundedLaw.discrete([float(v) for v, _ in pairs], [float(w) for _, w in pairs])
        if kind == "mixture":
            atoms, uni = [], None
            for token in filter(None, (t.strip() for t in re.split(r",(?![^\[]*\])", body))):
                val, mass = token.rsplit(":", 1)
                if val.startswith("U["):
                    lo, hi = (float(t) for t in val[2:-1].split(","))
                    uni = (lo, hi, float(mass))
                else:
                    atoms.append((float(val), float(mass)))
            return BoundedLaw(tuple(atoms), uni)
        if kind == "tilt":
            inner, theta = body.rsplit(",", 1)
            return parse_law(inner).tilted(float(theta))
    except InvalidInput:
        raise
    except Exception as exc:  # malformed numbers and the like
        raise InvalidInput(f"cannot parse law {text!r}: {exc}") from exc
    raise InvalidInput(f"unknown law kind {kind!r}")


def truncate_law(law: BoundedLaw, alpha: float) -> BoundedLaw:
    """Pushforward of ``law`` under t -> max(t, alpha)."""
    alpha = float(alpha)
    if alpha <= 0:
        raise InvalidInput("alpha must be positive")
    if alpha >= law.b:
        raise InvalidInput(f"alpha={alpha} must be below the support supremum {law.b}")
    if alpha <= law.a:
        return law
    atoms = {}
    for v, m in law.atoms:
        key = max(v, alpha)
        atoms[key] = atoms.get(key, 0.0) + m
    uni = None
    if law.uniform:
        lo, hi, um = law.uniform
        if alpha <= lo:
            uni = law.uniform
        else:
            below = um * (alpha - lo) / (hi - lo)
            atoms[alpha] = atoms.get(alpha, 0.0) + below
            uni = (alpha, hi, um - below)
    if not law.uniform and len(atoms) == 2 and len(law.atoms) == 2:
        (a, pa), (b, pb) = sorted(atoms.items())
        return BoundedLaw.two_point(a, b, pb)
    if not law.uniform and len(atoms) == 1:
        return BoundedLaw.dirac(next(iter(atoms)))
    return BoundedLaw(tuple(atoms.items()), uni)


# ---------------------------------------------------------------------------
# Counter-based per-edge randomness
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x ^ (x >> np.uint64(30))
        x = x * np.uint64(0xBF58476D1CE4E5B9)
        x = x ^ (x >> np.uint64(27))
        x = x * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x


def stream_key(master_seed, stream):
    """64-bit key for a (master seed, stream) pair; ``stream`` may be an array."""
    s = np.asarray(master_seed, dtype=np.int64).astype(np.uint64)
    t = np.asarray(stream, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(_mix64(s + _GOLDEN) ^ (t * _GOLDEN + np.uint64(1)))


def edge_codes(base, axis):
    """Box-independent 64-bit codes for edges given by (lower endpoint, axis)."""
    base = np.asarray(base, dtype=np.int64)
    h = _mix64(np.asarray(axis, dtype=np.int64).astype(np.uint64) + np.uint64(0x632BE59BD9B4E019))
    with np.errstate(over="ignore"):
        for i in range(base.shape[1]):
            h = _mix64(h ^ (base[:, i].astype(np.uint64) * _GOLDEN + np.uint64(i + 1)))
    return h


def edge_uniforms(key, codes):
    """Uniforms in [0, 1) for each (key, edge code) pair, with broadcasting."""
    key = np.asarray(key, dtype=np.uint64)
    codes = np.asarray(codes, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(key[..., None] ^ codes) if key.ndim else _mix64(key ^ codes)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightConfiguration:
    box: LatticeBox
    weights: np.ndarray
    law: BoundedLaw
    seed: tuple = (None, None)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (self.box.num_edges,):
            raise InvalidInput(f"expected {self.box.num_edges} weights, got shape {w.shape}")
        if np.any(w < self.law.a - _ATOL) or np.any(w > self.law.b + _ATOL):
            raise InvalidInput("edge weight outside the law's support")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.box.d

    @property
    def a(self):
        return self.law.a

    @property
    def b(self):
        return self.law.b

    def weight(self, p, q):
        idx = self.box.edge_index(p, q)
        if idx is None:
            raise InvalidInput(f"no edge between {p} and {q}")
        return float(self.weights[idx])

    def with_weights(self, weights, seed=None):
        return WeightConfiguration(self.box, weights, self.law, self.seed if seed is None else seed)

    def restricted(self, box: LatticeBox):
        """Configuration on a sub-box, keeping the shared edge weights."""
        if not self.box.contains_box(box):
            raise InvalidInput("sub-box not contained in configuration box")
        base, axis, _, _ = box.edges()
        lookup = self.box.edge_lookup()
        idx = [lookup[(tuple(int(c) for c in b), int(a))] for b, a in zip(base, axis)]
        return WeightConfiguration(box, self.weights[idx], self.law, self.seed)

    def equals(self, other) -> bool:
        return (self.box == other.box and np.array_equal(self.weights, other.weights))


def sample_configuration(box: LatticeBox, law: BoundedLaw, master_seed: int, stream: int = 0) -> WeightConfiguration:
    """Draw i.i.d. weights from ``law``; each edge's draw depends only on (seed, stream, edge)."""
    base, axis, _, _ = box.edges()
    u = edge_uniforms(stream_key(master_seed, stream), edge_codes(base, axis))
    return WeightConfiguration(box, law.quantile(u), law, (int(master_seed), int(stream)))


def sample_weight_matrix(box: LatticeBox, law: BoundedLaw, master_seed: int, streams) -> np.ndarray:
    """Weights for many streams at once, shape (len(streams), num_edges).

    Row i equals sample_configuration(box, law, master_seed, streams[i]).weights.
    """
    base, axis, _, _ = box.edges()
    keys = stream_key(master_seed, np.asarray(streams))
    u = edge_uniforms(keys, edge_codes(base, axis))
    return law.quantile(u.ravel()).reshape(u.shape)


def configuration_from_function(box: LatticeBox, law: BoundedLaw, fn) -> WeightConfiguration:
    """Build a configuration with weight fn(lower endpoint, axis) on every edge."""
    base, axis, _, _ = box.edges()
    return WeightConfiguration(box, [fn(tuple(b), int(a)) for b, a in zip(base, axis)], law)


# ---------------------------------------------------------------------------
# Dump / load
# ---------------------------------------------------------------------------


def dump_configuration(config: WeightConfiguration) -> str:
    lines = [
        "# fpplab configuration v1",
        "# box lower=" + ",".join(map(str, config.box.lower)) + " upper=" + ",".join(map(str, config.box.upper)),
        "# law " + config.law.describe(),
        f"# seed master={config.seed[0]} stream={config.seed[1]}",
        "# columns: " + " ".join(f"x{i + 1}" for i in range(config.d)) + " axis weight",
    ]
    base, axis, _, _ = config.box.edges()
    for b, a, w in zip(base, axis, config.weights):
        lines.append(" ".join(str(int(c)) for c in b) + f" {int(a)} {float(w).hex()}")
    return "\n".join(lines) + "\n"


def load_configuration(text: str) -> WeightConfiguration:
    header = {}
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, _, rest = body.partition(" ")
            header[key] = rest
        else:
            rows.append(line.split())
    try:
        lo_txt, hi_txt = header["box"].split()
        lower = tuple(int(t) for t in lo_txt.split("=")[1].split(","))
        upper = tuple(int(t) for t in hi_txt.split("=")[1].split(","))
        law = parse_law(header["law"])
        seed_parts = dict(t.split("=") for t in header["seed"].split())
    except (KeyError, ValueError, IndexError) as exc:
        raise InvalidInput(f"malformed configuration header: {exc}") from exc
    box = LatticeBox(lower, upper)
    seed = tuple(None if seed_parts[k] == "None" else int(seed_parts[k]) for k in ("master", "stream"))
    lookup = box.edge_lookup()
    weights = np.full(box.num_edges, np.nan)
    for row in rows:
        *coords, ax, w = row
        key = (tuple(int(c) for c in coords), int(ax))
        if key not in lookup:
            raise InvalidInput(f"edge {key} not in box")
        weights[lookup[key]] = float.fromhex(w) if w.startswith(("0x", "-0x")) else float(w)
    if np.isnan(weights).any():
        raise InvalidInput("configuration file misses some edges")
    return WeightConfiguration(box, weights, law, seed)


def enumerate_atom_configurations(law: BoundedLaw, num_edges: int):
    """Yield (weights, probability) over all atomic assignments (small cases only)."""
    vals = np.array([v for v, _ in law.atoms])
    masses = np.array([m for _, m in law.atoms])
    for combo in itertools.product(range(len(vals)), repeat=num_edges):
        idx = np.array(combo)
        yield vals[idx], float(np.prod(masses[idx]))
