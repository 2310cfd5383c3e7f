"""Passage times on weighted lattice boxes.

Continuous endpoints are handled on a coordinate-refined grid: along axis i the
grid uses every integer of the box together with the i-th coordinates of the
query points (and of the window bounds for box windows).  Neighbouring grid
points are joined by a segment whose cost follows the step rule for the
continuous passage time (edge weight times length when both ends lie on a
common lattice edge, b times the l1 length otherwise).  For each coordinate
the cost of a polygonal sequence of fixed combinatorial type is a sum of
weighted absolute increments under interval constraints with integer ends, so
optimal waypoints have coordinates among the integers and the endpoint
coordinates; the refined grid therefore carries an optimal sequence.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .geometry import ConvexWindow
from .lattice import InvalidInput, LatticeBox, WeightConfiguration

log = logging.getLogger(__name__)


@dataclass
class GeodesicPath:
    points: np.ndarray
    segment_times: np.ndarray
    total_time: float

    @property
    def l1_length(self):
        if len(self.points) < 2:
            return 0.0
        return float(np.abs(np.diff(self.points, axis=0)).sum())

    def __len__(self):
        return len(self.points)


@dataclass
class CrossingTimes:
    times: np.ndarray
    n: int


@dataclass
class RefinedGraph:
    """Shortest-path graph on a coordinate-refined grid of a configuration box."""

    matrix: csr_matrix
    coords: np.ndarray          # node coordinates, shape (N, d)
    axes: list                  # sorted coordinate values per axis
    node_of_cell: np.ndarray    # flat product-grid index -> node id or -1
    meta: dict = field(default_factory=dict)

    def node(self, x):
        x = np.asarray(x, dtype=float)
        idx = []
        for i, vals in enumerate(self.axes):
            j = int(np.searchsorted(vals, x[i]))
            if j >= len(vals) or vals[j] != x[i]:
                raise InvalidInput(f"point {x} is not a node of the refined grid")
            idx.append(j)
        flat = int(np.ravel_multi_index(tuple(idx), tuple(len(v) for v in self.axes)))
        nid = int(self.node_of_cell[flat])
        if nid < 0:
            raise InvalidInput(f"point {x} lies outside the window")
        return nid


def _box_span(box: LatticeBox):
    return ConvexWindow.box(np.array(box.lower, float), np.array(box.upper, float))


def _check_inside(box: LatticeBox, pts, window=None):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("non-finite coordinates")
    if pts.shape[1] != box.d:
        raise InvalidInput(f"points must have dimension {box.d}")
    if np.any(pts < np.array(box.lower) - 1e-12) or np.any(pts > np.array(box.upper) + 1e-12):
        raise InvalidInput("point outside the configuration box")
    if window is not None and not np.all(window.contains(pts)):
        raise InvalidInput("point outside the window")
    return pts


def build_graph(config: WeightConfiguration, queries=(), window: ConvexWindow | None = None) -> RefinedGraph:
    """Refined-grid graph carrying optimal polygonal sequences between the query points."""
    box = config.box
    d = box.d
    queries = np.zeros((0, d)) if len(queries) == 0 else _check_inside(box, queries, window)
    axes = []
    for i in range(d):
        vals = [np.arange(box.lower[i], box.upper[i] + 1, dtype=float), queries[:, i]]
        if window is not None and window.is_box:
            vals.append(np.clip([window.lower[i], window.upper[i]], box.lower[i], box.upper[i]))
        axes.append(np.unique(np.concatenate(vals)))
    shape = tuple(len(v) for v in axes)
    grid_idx = np.indices(shape).reshape(d, -1)
    coords = np.stack([axes[i][grid_idx[i]] for i in range(d)], axis=1)
    if window is not None:
        keep = window.contains(coords)
    else:
        keep = np.ones(len(coords), dtype=bool)
    node_of_cell = np.full(len(coords), -1, dtype=np.int64)
    node_of_cell[keep] = np.arange(int(keep.sum()))

    integral = [np.floor(v) == v for v in axes]
    table = box.edge_table()
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(d)])
    rows, cols, costs = [], [], []
    b = config.b
    for i in range(d):
        has_next = grid_idx[i] < shape[i] - 1
        u = np.flatnonzero(has_next & keep)
        v = u + strides[i]
        ok = keep[v]
        u, v = u[ok], v[ok]
        step = axes[i][grid_idx[i][v]] - axes[i][grid_idx[i][u]]
        coedge = np.ones(len(u), dtype=bool)
        for j in range(d):
            if j != i:
                coedge &= integral[j][grid_idx[j][u]]
        cost = b * step
        if np.any(coedge):
            base = coords[u[coedge]].copy()
            base[:, i] = np.floor(base[:, i])
            eid = table[box.vertex_index(base.astype(np.int64)), i]
            cost[coedge] = config.weights[eid] * step[coedge]
        rows.append(node_of_cell[u])
        cols.append(node_of_cell[v])
        costs.append(cost)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    costs = np.concatenate(costs)
    n_nodes = int(keep.sum())
    mat = csr_matrix((np.concatenate([costs, costs]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                     shape=(n_nodes, n_nodes))
    mat.sort_indices()
    return RefinedGraph(mat, coords[keep], axes, node_of_cell)


def shortest_path_tree(matrix: csr_matrix, source: int, target: int | None = None):
    """Binary-heap Dijkstra; equal keys pop in node order and arcs are scanned in column order."""
    indptr, indices, data = matrix.indptr, matrix.indices, matrix.data
    n = matrix.shape[0]
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = du + data[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _extract_path(graph: RefinedGraph, dist, pred, src, dst) -> GeodesicPath:
    seq = [dst]
    while seq[-1] != src:
        p = pred[seq[-1]]
        if p < 0:
            raise InvalidInput("target unreachable")
        seq.append(int(p))
    seq.reverse()
    pts = graph.coords[seq]
    seg = np.array([graph.matrix[seq[t], seq[t + 1]] for t in range(len(seq) - 1)])
    return GeodesicPath(pts, seg, float(dist[dst]))


def discrete_passage_time(config: WeightConfiguration, x, y):
    """Minimal summed weight over lattice paths inside the box, with a minimising path."""
    x = np.asarray(x)
    y = np.asarray(y)
    for p in (x, y):
        if not np.all(np.floor(p) == p) or not config.box.contains(p):
            raise InvalidInput(f"{p} is not a vertex of the box")
    graph = lattice_graph(config)
    src, dst = int(config.box.vertex_index(x)), int(config.box.vertex_index(y))
    dist, pred = shortest_path_tree(graph.matrix, src, dst)
    return float(dist[dst]), _extract_path(graph, dist, pred, src, dst)


def lattice_graph(config: WeightConfiguration) -> RefinedGraph:
    """Graph of the lattice edges of the box; node ids equal vertex row-major indices."""
    cached = getattr(config, "_lattice_graph", None)
    if cached is None:
        cached = build_graph(config)
        object.__setattr__(config, "_lattice_graph", cached)
    return cached


def continuous_passage_time(config: WeightConfiguration, x, y) -> float:
    return box_passage_time(config, None, x, y)


def box_passage_time(config: WeightConfiguration, window: ConvexWindow | None, x, y) -> float:
    """Passage time between real points over polygonal sequences inside ``window``."""
    pts = _check_inside(config.box, [x, y], window)
    graph = build_graph(config, pts, window)
    s, t = graph.node(pts[0]), graph.node(pts[1])
    if s == t:
        return 0.0
    dist = dijkstra(graph.matrix, indices=s)
    return float(dist[t])


def continuous_geodesic(config: WeightConfiguration, x, y, window: ConvexWindow | None = None) -> GeodesicPath:
    pts = _check_inside(config.box, [x, y], window)
    graph = build_graph(config, pts, window)
    s, t = graph.node(pts[0]), graph.node(pts[1])
    dist, pred = shortest_path_tree(graph.matrix, s, t)
    return _extract_path(graph, dist, pred, s, t)


def pairwise_times(config: WeightConfiguration, points, window: ConvexWindow | None = None) -> np.ndarray:
    """Symmetric matrix of box passage times between all given points."""
    pts = _check_inside(config.box, points, window)
    graph = build_graph(config, pts, window)
    ids = np.array([graph.node(p) for p in pts])
    order = np.unique(ids)
    dist = dijkstra(graph.matrix, indices=order)
    row = np.searchsorted(order, ids)
    T = dist[row][:, ids]
    T = np.minimum(T, T.T)
    np.fill_diagonal(T, 0.0)
    return T


def covering_box(window: ConvexWindow, n) -> LatticeBox:
    """Smallest lattice box containing n * window."""
    lo = np.floor(window.lower * n + 1e-9).astype(int)
    hi = np.ceil(window.upper * n - 1e-9).astype(int)
    return LatticeBox(tuple(lo), tuple(hi))


def rescaled_metric(config: WeightConfiguration, window: ConvexWindow, n, k):
    """GridMetric of (x, y) -> BoxPT_{nX}(nx, ny) / n on the k-grid of X."""
    from .metric import GridMetric

    if k < 1 or n <= 0:
        raise InvalidInput("need n > 0 and k >= 1")
    if not config.box.contains_box(covering_box(window, n)):
        raise InvalidInput(f"configuration box {config.box} does not cover n*X")
    pts = window.grid_points(k)
    scaled_window = window.scaled(n)
    T = pairwise_times(config, pts * n, scaled_window)
    return GridMetric(window, pts, T / n, config.a, config.b, k,
                      meta={"source": "rescaled", "n": n, "seed": config.seed})


def crossing_times(config: WeightConfiguration, n: int) -> CrossingTimes:
    """Rescaled face-to-face passage times of [0, n]^d, one per axis."""
    d = config.d
    cube = LatticeBox.cube(n, d)
    if not config.box.contains_box(cube):
        raise InvalidInput(f"configuration box must contain [0,{n}]^{d}")
    sub = config if config.box == cube else config.restricted(cube)
    graph = lattice_graph(sub)
    verts = cube.vertices()
    out = np.empty(d)
    for i in range(d):
        sources = np.flatnonzero(verts[:, i] == 0)
        sinks = np.flatnonzero(verts[:, i] == n)
        dist = dijkstra(graph.matrix, indices=sources, min_only=True)
        out[i] = dist[sinks].min() / n
    return CrossingTimes(out, n)


def ball_box(n, a, d) -> LatticeBox:
    r = int(np.ceil(n / a - 1e-12))
    return LatticeBox((-r,) * d, (r,) * d)


def growing_ball(config: WeightConfiguration, n, mesh):
    """Mesh points x of [-1/a, 1/a]^d with T(0, n x) <= n."""
    a = config.a
    if a <= 0:
        raise InvalidInput("the growing ball needs a > 0")
    d = config.d
    if not config.box.contains_box(ball_box(n, a, d)):
        raise InvalidInput("configuration box must contain [-ceil(n/a), ceil(n/a)]^d")
    k = 1.0 / mesh
    if abs(k - round(k)) > 1e-9:
        raise InvalidInput("mesh must be 1/k for an integer k")
    k = int(round(k))
    pts = ConvexWindow.cube(d, -1.0 / a, 1.0 / a).grid_points(k)
    pts = pts[np.abs(pts).sum(axis=1) <= 1.0 / a + 1e-12]
    times = times_from_origin(config, pts * n)
    return pts[times <= n * (1 + 1e-12)]


def times_from_origin(config: WeightConfiguration, targets, window=None) -> np.ndarray:
    targets = _check_inside(config.box, targets, window)
    origin = np.zeros((1, config.d))
    graph = build_graph(config, np.vstack([origin, targets]), window)
    dist = dijkstra(graph.matrix, indices=graph.node(origin[0]))
    return np.array([dist[graph.node(p)] for p in targets])


def localization_box(x, y, a, b) -> LatticeBox:
    """Lattice box containing every path from x to y of l1 length at most (b/a)|x - y|."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.abs(x - y).sum()
    slack = 0.5 * (b / a - 1.0) * dist
    lo = np.floor(np.minimum(x, y) - slack).astype(int)
    hi = np.ceil(np.maximum(x, y) + slack).astype(int)
    hi = np.maximum(hi, lo + 1)
    return LatticeBox(tuple(lo), tuple(hi))


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------


def points_csv(points, columns=None, schema_note="") -> str:
    points = np.atleast_2d(points)
    columns = columns or [f"x{i + 1}" for i in range(points.shape[1])]
    lines = [f"# schema: {','.join(columns)}{(' ; ' + schema_note) if schema_note else ''}", ",".join(columns)]
    lines += [",".join(repr(float(v)) for v in row) for row in points]
    return "\n".join(lines) + "\n"


def geodesic_csv(path: GeodesicPath) -> str:
    d = path.points.shape[1]
    cum = np.concatenate([[0.0], np.cumsum(path.segment_times)])
    data = np.hstack([path.points, cum[:, None]])
    return points_csv(data, [f"x{i + 1}" for i in range(d)] + ["elapsed_time"], "lattice units")
