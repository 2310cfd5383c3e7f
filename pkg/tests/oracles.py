"""Independent brute-force oracles used by the test suite.

Nothing here calls the package's shortest-path code: paths are enumerated
directly from the edge weights.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.sparse.csgraph import shortest_path


def adjacency(config):
    """vertex tuple -> list of (neighbour tuple, weight), built from the raw edge table."""
    base, axis, _, _ = config.box.edges()
    adj = {}
    for b, a, w in zip(base, axis, config.weights):
        p = tuple(int(c) for c in b)
        q = list(p)
        q[int(a)] += 1
        q = tuple(q)
        adj.setdefault(p, []).append((q, float(w)))
        adj.setdefault(q, []).append((p, float(w)))
    return adj


def simple_path_minimum(config, x, y, prune=False):
    """Least total weight over all self-avoiding lattice paths from x to y.

    With ``prune`` a branch is abandoned once its cost plus a times the
    remaining l1 distance cannot beat the best complete path found so far;
    every path that could still win is enumerated, so the value is exact.
    """
    x, y = tuple(int(c) for c in x), tuple(int(c) for c in y)
    if x == y:
        return 0.0
    adj = adjacency(config)
    a = config.a
    best = [np.inf]
    visited = {x}

    def dfs(v, cost):
        if v == y:
            if cost < best[0]:
                best[0] = cost
            return
        if prune and cost + a * sum(abs(p - q) for p, q in zip(v, y)) >= best[0]:
            return
        for u, w in adj[v]:
            if u not in visited:
                visited.add(u)
                dfs(u, cost + w)
                visited.discard(u)

    dfs(x, 0.0)
    return best[0]


def count_simple_paths(config, x, y):
    adj = adjacency(config)
    x, y = tuple(x), tuple(y)
    visited = {x}
    count = [0]

    def dfs(v):
        if v == y:
            count[0] += 1
            return
        for u, _ in adj[v]:
            if u not in visited:
                visited.add(u)
                dfs(u)
                visited.discard(u)

    dfs(x)
    return count[0]


def face_to_face_minimum(config, n, axis):
    """Least weight over self-avoiding paths from the face x_axis = 0 to the face x_axis = n of [0, n]^d."""
    adj = adjacency(config)
    d = config.d
    best = [np.inf]

    def dfs(v, cost, visited):
        if cost >= best[0]:
            return
        if v[axis] == n:
            best[0] = cost
            return
        for u, w in adj[v]:
            if u not in visited and all(0 <= c <= n for c in u):
                visited.add(u)
                dfs(u, cost + w, visited)
                visited.discard(u)

    for start in itertools.product(*[range(n + 1) if i != axis else [0] for i in range(d)]):
        dfs(start, 0.0, {start})
    return best[0] / n


def step_cost(config, p, q):
    """Cost of the straight step from p to q: weight times length on a common lattice edge, b |q - p|_1 otherwise."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff = q - p
    length = float(np.abs(diff).sum())
    if length == 0:
        return 0.0
    moving = np.flatnonzero(diff != 0)
    if len(moving) == 1:
        i = int(moving[0])
        if all(p[j] == np.floor(p[j]) for j in range(len(p)) if j != i):
            lo, hi = min(p[i], q[i]), max(p[i], q[i])
            v = np.floor(lo)
            if hi <= v + 1:
                base = p.copy()
                base[i] = v
                top = base.copy()
                top[i] = v + 1
                return config.weight(base.astype(int), top.astype(int)) * length
    return config.b * length


def polygonal_oracle(config, x, y, spacing=0.25):
    """Least cost over polygonal sequences whose waypoints lie on a product grid.

    Per axis the grid holds the multiples of ``spacing`` in the box together
    with the endpoint coordinates; every pair of waypoints is joined by a
    straight step priced by :func:`step_cost`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = config.d
    axes = []
    for i in range(d):
        lo, hi = config.box.lower[i], config.box.upper[i]
        vals = np.arange(lo, hi + spacing / 2, spacing)
        axes.append(np.unique(np.concatenate([vals, [x[i], y[i]]])))
    nodes = np.array(list(itertools.product(*axes)))
    N = len(nodes)
    W = np.zeros((N, N))
    for s in range(N):
        for t in range(s + 1, N):
            W[s, t] = W[t, s] = step_cost(config, nodes[s], nodes[t])
    # zero entries mean "no arc" to scipy; distinct nodes always have positive cost here
    dist = shortest_path(W, method="D", directed=False)
    si = int(np.flatnonzero(np.all(nodes == x, axis=1))[0])
    ti = int(np.flatnonzero(np.all(nodes == y, axis=1))[0])
    return float(dist[si, ti])


def hausdorff_double_loop(A, B):
    def directed(P, Q):
        worst = 0.0
        for p in P:
            best = np.inf
            for q in Q:
                best = min(best, float(np.abs(np.asarray(p) - np.asarray(q)).sum()))
            worst = max(worst, best)
        return worst

    return max(directed(A, B), directed(B, A))
