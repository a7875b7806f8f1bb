"""Shared brute-force oracles and instance generators for the test suite.

The oracles here are written from the definitions and deliberately avoid
the package's own fast paths.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np
import pytest

from hstkm import build_graph_metric, build_vector_metric


def bellman_ford_apsp(edges, n):
    """All-pairs distances by relaxing every edge n times from each source."""
    out = np.full((n, n), np.inf)
    for s in range(n):
        d = out[s]
        d[s] = 0.0
        for _ in range(n):
            changed = False
            for u, v, w in edges:
                if d[u] + w < d[v]:
                    d[v] = d[u] + w
                    changed = True
                if d[v] + w < d[u]:
                    d[u] = d[v] + w
                    changed = True
            if not changed:
                break
    return out


def brute_pairwise(space):
    n = space.n
    return np.array([[space.distance(u, v) for v in range(n)] for u in range(n)])


def path_walk_distance(tree, u, v):
    """Sum of edge lengths along the tree path between the leaves of u and v.

    Edge lengths come straight from the levels: an edge from a node at level
    j up to a parent at level i spans 2**(j) + ... + 2**(i-1); a leaf counts
    from level 0 because it stands for a chain down to the bottom.
    """
    def up_lengths(x):
        lengths = {}
        acc = 0.0
        node = int(tree.leaf_of[x])
        while tree.parent[node] >= 0:
            p = int(tree.parent[node])
            start = 0 if tree.leaf_point[node] >= 0 else int(tree.level[node])
            acc += sum(2.0 ** j for j in range(start, int(tree.level[p])))
            lengths[p] = acc
            node = p
        return lengths

    if u == v:
        return 0.0
    a, b = up_lengths(u), up_lengths(v)
    return min(a[x] + b[x] for x in a if x in b)


def tree_metric_matrix(tree):
    n = tree.n_points
    return np.array([[path_walk_distance(tree, u, v) for v in range(n)] for u in range(n)])


def set_cost(dist, centers, demand=None, squared=False):
    d = dist[list(centers)]
    if demand is not None:
        d = d[:, list(demand)]
    near = d.min(axis=0)
    return float((near ** 2 if squared else near).sum())


def brute_opt(dist, k, demand=None, squared=False):
    n = dist.shape[0]
    return min(set_cost(dist, c, demand, squared) for c in combinations(range(n), k))


def best_leaf_per_subtree(tree, dist_t, roots, squared=False):
    """Cheapest way to pick one leaf under each root (exhaustive)."""
    pools = [tree.points_under(r).tolist() for r in roots]
    return min(set_cost(dist_t, c, squared=squared) for c in product(*pools))


def random_tiny_space(rng):
    """A random space with 3..10 points; vector (l1/l2) or a connected graph."""
    n = int(rng.integers(3, 11))
    if rng.random() < 0.5:
        d = int(rng.integers(1, 4))
        pts = rng.uniform(0, 10, size=(n, d))
        if rng.random() < 0.3:
            pts = np.round(pts)  # allow duplicates and ties
        return build_vector_metric(pts, "l1" if rng.random() < 0.5 else "l2")
    edges = [(i, i + 1, float(rng.uniform(0.1, 5))) for i in range(n - 1)]
    for u, v in combinations(range(n), 2):
        if v > u + 1 and rng.random() < 0.3:
            edges.append((u, v, float(rng.uniform(0.1, 5))))
    perm = rng.permutation(n)
    edges = [(int(perm[u]), int(perm[v]), w) for u, v, w in edges]
    return build_graph_metric(edges, n)


@pytest.fixture
def line4():
    return build_vector_metric(np.arange(4.0)[:, None], "l1")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
