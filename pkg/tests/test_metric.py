import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hstkm import (DisconnectedGraphError, InvalidInputError, build_graph_metric,
                   build_vector_metric, load_space)
from hstkm.metric import read_edge_list, read_vector_csv, write_edge_list

from conftest import bellman_ford_apsp, brute_pairwise


def test_line_l1():
    s = build_vector_metric([[0.0], [3.0]], "l1")
    assert s.distance(0, 1) == 3
    assert s.diameter == 3


def test_345_triangle():
    s = build_vector_metric([[0.0, 0.0], [3.0, 4.0]], "l2")
    assert s.distance(0, 1) == pytest.approx(5.0)


def test_unit_line_diameter_and_min_dist(line4):
    assert line4.diameter == 3
    assert line4.min_dist == 1
    assert line4.distance(0, 3) == 3
    assert line4.distance(2, 2) == 0


def test_min_dist_ignores_duplicates():
    s = build_vector_metric([[0.0], [0.0], [2.5], [4.0]], "l2")
    assert s.min_dist == pytest.approx(1.5)


def test_empty_matrix_rejected():
    with pytest.raises(InvalidInputError):
        build_vector_metric(np.empty((0, 2)))


def test_unknown_norm_rejected():
    with pytest.raises(InvalidInputError):
        build_vector_metric([[0.0], [1.0]], "linf")


def test_path_graph():
    s = build_graph_metric([(0, 1, 1.0), (1, 2, 1.0)], 3)
    assert s.distance(0, 2) == 2


def test_triangle_shortcut():
    s = build_graph_metric([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0)], 3)
    assert s.distance(0, 2) == 2


def test_star_diameter():
    s = build_graph_metric([(0, i, 1.0) for i in range(1, 5)], 5)
    assert s.diameter == 2


def test_disconnected_graph_names_pair():
    with pytest.raises(DisconnectedGraphError) as info:
        build_graph_metric([(0, 1, 1.0), (2, 3, 1.0)], 4)
    u, v = info.value.pair
    assert {u, v} & {0, 1} and {u, v} & {2, 3}


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_nonpositive_weight(w):
    with pytest.raises(InvalidInputError):
        build_graph_metric([(0, 1, w)], 2)


def test_out_of_range_ids():
    s = build_graph_metric([(0, 1, 1.0)], 2)
    with pytest.raises(InvalidInputError):
        s.distance(0, 2)
    with pytest.raises(InvalidInputError):
        s.distance(-1, 0)
    with pytest.raises(InvalidInputError):
        build_graph_metric([(0, 5, 1.0)], 2)


def test_parallel_edges_keep_minimum():
    s = build_graph_metric([(0, 1, 4.0), (1, 0, 2.0)], 2)
    assert s.distance(0, 1) == 2


@pytest.mark.parametrize("seed", range(15))
def test_graph_matches_bellman_ford(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    edges = [(i, int(rng.integers(0, i)), float(rng.uniform(0.1, 3))) for i in range(1, n)]
    for _ in range(int(rng.integers(0, 2 * n))):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.append((int(u), int(v), float(rng.uniform(0.1, 3))))
    s = build_graph_metric(edges, n)
    oracle = bellman_ford_apsp(edges, n)
    np.testing.assert_allclose(s.pairwise(), oracle, rtol=1e-12)
    off = oracle[~np.eye(n, dtype=bool)]
    assert s.diameter == pytest.approx(oracle.max())
    assert s.min_dist == pytest.approx(off[off > 0].min())


points_strategy = arrays(np.float64, st.tuples(st.integers(2, 25), st.integers(1, 4)),
                         elements=st.floats(-100, 100, allow_nan=False, width=32))


@settings(max_examples=60, deadline=None)
@given(points_strategy, st.sampled_from(["l1", "l2"]))
def test_vector_metric_axioms(pts, norm):
    s = build_vector_metric(pts, norm)
    d = brute_pairwise(s)
    assert np.all(np.diag(d) == 0)
    np.testing.assert_array_equal(d, d.T)
    # triangle inequality over all triples
    lhs = d[:, None, :]
    rhs = d[:, :, None] + d[None, :, :]
    assert np.all(lhs <= rhs * (1 + 1e-9) + 1e-9)
    assert s.diameter == pytest.approx(d.max())
    pos = d[d > 0]
    assert s.min_dist == pytest.approx(pos.min() if pos.size else 1.0)


def test_large_vector_diameter_matches_brute_force():
    pts = np.random.default_rng(3).normal(size=(3000, 3))
    s = build_vector_metric(pts)
    from scipy.spatial.distance import pdist
    assert s.diameter == pytest.approx(pdist(pts).max())
    assert s.min_dist == pytest.approx(pdist(pts).min())


def test_edge_list_roundtrip(tmp_path):
    edges = [(0, 1, 1.5), (1, 2, 0.25), (0, 2, 3.0)]
    p = tmp_path / "g.txt"
    write_edge_list(p, edges, 3)
    got, n = read_edge_list(p)
    assert n == 3 and sorted(got) == sorted(edges)
    assert load_space(p).distance(0, 2) == pytest.approx(1.75)


def test_edge_list_error_position(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3 2\n0 1 1.0\n1 two 1.0\n")
    with pytest.raises(InvalidInputError, match=r"bad.txt:3"):
        read_edge_list(p)


def test_csv_ragged_rows(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("0,1\n2,3,4\n")
    with pytest.raises(InvalidInputError, match=r"x.csv:2"):
        read_vector_csv(p)


def test_csv_load(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("0,0\n3,4\n")
    s = load_space(p, "l2")
    assert s.backend == "vector" and s.distance(0, 1) == pytest.approx(5.0)
