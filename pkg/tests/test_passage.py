import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpplab.geometry import ConvexWindow
from fpplab.lattice import BoundedLaw, InvalidInput, LatticeBox, configuration_from_function, sample_configuration
from fpplab.passage import (ball_box, box_passage_time, continuous_geodesic, continuous_passage_time,
                            crossing_times, discrete_passage_time, geodesic_csv, growing_ball, pairwise_times,
                            rescaled_metric)
from oracles import face_to_face_minimum, simple_path_minimum

TWO = BoundedLaw.two_point(1, 2, 0.5)
UNI = BoundedLaw.uniform_law(1, 2)


def test_dirac_discrete_time():
    cfg = sample_configuration(LatticeBox.cube(5, 2), BoundedLaw.dirac(1.0), 0, 0)
    t, path = discrete_passage_time(cfg, (0, 0), (3, 2))
    assert t == 5.0
    assert path.total_time == 5.0 and len(path) == 6


def test_same_point():
    cfg = sample_configuration(LatticeBox.cube(3, 2), TWO, 0, 0)
    t, path = discrete_passage_time(cfg, (1, 2), (1, 2))
    assert t == 0.0 and len(path) == 1
    assert continuous_passage_time(cfg, (0.3, 0.7), (0.3, 0.7)) == 0.0


def test_endpoint_outside_box():
    cfg = sample_configuration(LatticeBox.cube(3, 2), TWO, 0, 0)
    with pytest.raises(InvalidInput):
        discrete_passage_time(cfg, (0, 0), (4, 0))
    with pytest.raises(InvalidInput):
        continuous_passage_time(cfg, (0, 0), (3.5, 0))
    with pytest.raises(InvalidInput):
        box_passage_time(cfg, ConvexWindow.box([0, 0], [1, 1]), (0, 0), (2, 2))


def test_segment_on_single_edge():
    box = LatticeBox.cube(2, 2)
    cfg = configuration_from_function(box, TWO, lambda b, a: 2.0 if (b, a) == ((0, 0), 0) else 1.0)
    assert continuous_passage_time(cfg, (0.25, 0), (0.75, 0)) == pytest.approx(1.0, abs=1e-15)
    cfg1 = configuration_from_function(box, TWO, lambda b, a: 1.0)
    assert continuous_passage_time(cfg1, (0.25, 0), (0.75, 0)) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("corner", [(0, 0), (1, 0), (0, 1), (1, 1)])
def test_cell_centre_to_corner_dirac_b(corner):
    cfg = sample_configuration(LatticeBox.cube(2, 2), BoundedLaw.dirac(2.0), 0, 0)
    x = np.array([0.5, 0.5])
    assert continuous_passage_time(cfg, x, corner) == pytest.approx(2.0 * np.abs(x - corner).sum(), abs=1e-15)


def test_box_time_full_window_equals_continuous():
    cfg = sample_configuration(LatticeBox.cube(3, 2), UNI, 1, 0)
    full = ConvexWindow.box([0, 0], [3, 3])
    for x, y in [((0.2, 0.4), (2.5, 1.0)), ((0, 0), (3, 3)), ((1, 0.5), (2.25, 3))]:
        assert box_passage_time(cfg, full, x, y) == continuous_passage_time(cfg, x, y)


def test_dirac_staircase_inside_window():
    cfg = sample_configuration(LatticeBox.cube(4, 2), BoundedLaw.dirac(1.5), 0, 0)
    win = ConvexWindow.polytope([[0, 0], [4, 0], [4, 4]])
    assert box_passage_time(cfg, win, (0, 0), (4, 3)) == pytest.approx(1.5 * 7)
    assert box_passage_time(cfg, win, (1, 0), (3, 2)) == pytest.approx(1.5 * 4)


def test_exclusion_forces_detour():
    box = LatticeBox.cube(4, 2)

    def w(b, a):
        fast_left = a == 1 and b[0] == 0
        fast_top = a == 0 and b[1] == 4
        return 1.0 if fast_left or fast_top else 2.0

    cfg = configuration_from_function(box, TWO, w)
    Y = ConvexWindow.box([0, 0], [4, 3])
    free = continuous_passage_time(cfg, (0, 0), (4, 3))
    restricted = box_passage_time(cfg, Y, (0, 0), (4, 3))
    assert free == 10.0
    assert restricted == simple_path_minimum(cfg.restricted(LatticeBox((0, 0), (4, 3))), (0, 0), (4, 3)) == 11.0
    assert restricted > free


def test_rescaled_dirac_is_scaled_l1():
    cfg = sample_configuration(LatticeBox.cube(4, 2), BoundedLaw.dirac(1.25), 0, 0)
    D = rescaled_metric(cfg, ConvexWindow.cube(2), 4, 4)
    assert np.array_equal(D.values, 1.25 * D.l1())


def test_rescaled_envelope_and_direct_recomputation():
    X = ConvexWindow.cube(2)
    cfg = sample_configuration(LatticeBox.cube(4, 2), TWO, 5, 3)
    D = rescaled_metric(cfg, X, 4, 4)
    L = D.l1()
    assert np.all(D.values >= L - 1e-12) and np.all(D.values <= 2 * L + 1e-12)
    rng = np.random.default_rng(0)
    for _ in range(40):
        i, j = rng.integers(len(D), size=2)
        direct = box_passage_time(cfg, X.scaled(4), 4 * D.points[i], 4 * D.points[j]) / 4
        assert D.values[i, j] == pytest.approx(direct, abs=1e-12)


def test_rescaled_needs_covering_box():
    cfg = sample_configuration(LatticeBox.cube(3, 2), TWO, 0, 0)
    with pytest.raises(InvalidInput):
        rescaled_metric(cfg, ConvexWindow.cube(2), 4, 4)


def test_crossing_dirac():
    cfg = sample_configuration(LatticeBox.cube(3, 3), BoundedLaw.dirac(1.7), 0, 0)
    assert np.allclose(crossing_times(cfg, 3).times, 1.7, atol=1e-15)


def test_crossing_matches_enumeration():
    for s in range(30):
        cfg = sample_configuration(LatticeBox.cube(3, 2), TWO, 8, s)
        got = crossing_times(cfg, 3).times
        for i in range(2):
            assert got[i] == face_to_face_minimum(cfg, 3, i)


def test_crossing_box_too_small():
    cfg = sample_configuration(LatticeBox.cube(2, 2), TWO, 0, 0)
    with pytest.raises(InvalidInput):
        crossing_times(cfg, 3)


@given(st.integers(0, 10_000), st.integers(0, 39), st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_raising_a_weight_never_decreases_crossing(seed, edge, bump):
    cfg = sample_configuration(LatticeBox.cube(4, 2), UNI, seed, 0)
    w = cfg.weights.copy()
    w[edge] = min(2.0, w[edge] + bump)
    before = crossing_times(cfg, 4).times
    after = crossing_times(cfg.with_weights(w), 4).times
    assert np.all(after >= before)
    assert np.all(before >= 1.0) and np.all(before <= 2.0)


def test_ball_dirac_is_l1_ball():
    c = 2.0
    cfg = sample_configuration(ball_box(4, c, 2), BoundedLaw.dirac(c), 0, 0)
    pts = growing_ball(cfg, 4, 0.125)
    grid = ConvexWindow.cube(2, -1 / c, 1 / c).grid_points(8)
    expected = grid[np.abs(grid).sum(axis=1) <= 1 / c + 1e-12]
    assert {tuple(p) for p in pts} == {tuple(p) for p in expected}


def test_ball_matches_pointwise_threshold():
    law = BoundedLaw.two_point(1, 2, 0.5)
    cfg = sample_configuration(ball_box(6, 1, 2), law, 3, 0)
    pts = growing_ball(cfg, 6, 0.25)
    inside = {tuple(p) for p in pts}
    assert np.all(np.abs(pts).sum(axis=1) <= 1.0 + 1e-12)
    cand = ConvexWindow.cube(2, -1, 1).grid_points(4)
    for p in cand:
        if np.abs(p).sum() > 1 + 1e-12:
            continue
        t = continuous_passage_time(cfg, (0, 0), 6 * p)
        assert (t <= 6) == (tuple(p) in inside)


def test_ball_rejects_a_zero():
    law = BoundedLaw.two_point(0, 1, 0.9)
    cfg = sample_configuration(LatticeBox.cube(2, 2, -2), law, 0, 0)
    with pytest.raises(InvalidInput):
        growing_ball(cfg, 1, 0.5)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_pairwise_times_are_a_metric(seed):
    cfg = sample_configuration(LatticeBox.cube(3, 2), UNI, seed, 1)
    rng = np.random.default_rng(seed)
    pts = np.vstack([rng.uniform(0, 3, (6, 2)), rng.integers(0, 4, (3, 2))])
    T = pairwise_times(cfg, pts)
    assert np.array_equal(T, T.T)
    assert np.all(np.diag(T) == 0)
    off = ~np.eye(len(T), dtype=bool) & (np.abs(pts[:, None] - pts[None]).sum(-1) > 0)
    assert np.all(T[off] > 0)
    for z in range(len(T)):
        assert np.all(T <= T[:, [z]] + T[[z], :] + 1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_geodesic_structure(seed):
    cfg = sample_configuration(LatticeBox.cube(4, 2), UNI, seed, 2)
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0, 4, 2), rng.uniform(0, 4, 2)
    g = continuous_geodesic(cfg, x, y)
    assert np.all(np.abs(np.diff(g.points, axis=0)).sum(axis=1) > 0)
    assert g.total_time == pytest.approx(g.segment_times.sum(), rel=1e-12)
    assert g.total_time == pytest.approx(continuous_passage_time(cfg, x, y), rel=1e-12)
    assert g.total_time >= cfg.a * g.l1_length - 1e-12
    text = geodesic_csv(g)
    assert text.startswith("# schema: x1,x2,elapsed_time")


@given(st.integers(0, 10_000), st.lists(st.integers(0, 39), min_size=1, max_size=8))
@settings(max_examples=30, deadline=None)
def test_monotone_coupling(seed, edges):
    cfg = sample_configuration(LatticeBox.cube(4, 2), UNI, seed, 3)
    w = cfg.weights.copy()
    w[edges] = 2.0
    hi = cfg.with_weights(w)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 4, (5, 2))
    assert np.all(pairwise_times(hi, pts) >= pairwise_times(cfg, pts) - 1e-12)
    ball_cfg = sample_configuration(ball_box(2, 1, 2), UNI, seed, 3)
    w2 = np.maximum(ball_cfg.weights, rng.uniform(1, 2, len(ball_cfg.weights)))
    slow = {tuple(p) for p in growing_ball(ball_cfg.with_weights(w2), 2, 0.5)}
    fast = {tuple(p) for p in growing_ball(ball_cfg, 2, 0.5)}
    assert slow <= fast
