import csv

import numpy as np
import pytest
from scipy.stats import binom

from hstkm import InvalidInputError
from hstkm.harness import (CSV_COLUMNS, ExperimentConfig, GraphGenConfig, _draw_graph,
                           gen_cluster_graph, gen_gaussian_mixture, iteration_cost, load_dataset, moving_average,
                           run_experiment, sample_demand, two_largest_clusters)


def split_edges(g):
    u, v = g.edges[:, 0].astype(int), g.edges[:, 1].astype(int)
    same = g.labels[u] == g.labels[v]
    return g.edges[same, 2], g.edges[~same, 2]


def test_weight_ranges_r100():
    g = gen_cluster_graph(GraphGenConfig(n=3000, r=100.0, seed=4))
    intra, inter = split_edges(g)
    assert intra.size and inter.size
    assert np.all((intra > 0) & (intra <= 1))
    assert np.all((inter >= 0.5) & (inter <= 100))
    assert np.bincount(g.labels).tolist() == [300] * 10


def test_weight_ranges_r1_overlap_intra():
    g = gen_cluster_graph(GraphGenConfig(n=400, r=1.0, seed=1))
    intra, inter = split_edges(g)
    assert np.all((inter >= 0.5) & (inter <= 1.0))
    assert np.any(intra >= 0.5)  # ranges overlap: less separable


def test_intra_edge_count_binomial():
    # two clusters of 10: 2 * C(10, 2) = 90 candidate pairs at p = 0.2.
    # Raw draws only; connectivity repair would bias the count.
    labels = np.repeat([0, 1], 10)
    cfg = GraphGenConfig(n=20, n_clusters=2, p_intra=0.2, p_inter=0.0)
    counts = []
    for seed in range(200):
        edges = _draw_graph(cfg, np.random.default_rng(seed), labels)
        assert np.all(labels[edges[:, 0].astype(int)] == labels[edges[:, 1].astype(int)])
        counts.append(len(edges))
    se = np.sqrt(90 * 0.2 * 0.8 / len(counts))
    assert abs(np.mean(counts) - 18) <= 3 * se
    lo, hi = binom.ppf([0.0005, 0.9995], 90, 0.2)
    assert lo <= min(counts) and max(counts) <= hi


def test_inter_edge_rate():
    g = gen_cluster_graph(GraphGenConfig(n=400, n_clusters=4, p_inter=0.02, seed=3))
    _, inter = split_edges(g)
    pairs = 400 * 399 / 2 - 4 * (100 * 99 / 2)
    se = np.sqrt(pairs * 0.02 * 0.98)
    assert abs(inter.size - pairs * 0.02) <= 4 * se


def test_generated_graph_connected_after_patch():
    g = gen_cluster_graph(GraphGenConfig(n=60, n_clusters=3, p_intra=0.05, p_inter=0.0, seed=0,
                                         max_regenerations=1))
    from hstkm import build_graph_metric
    build_graph_metric(g.edge_list(), g.n)  # raises if disconnected
    assert g.patched


def test_generator_errors():
    with pytest.raises(InvalidInputError):
        gen_cluster_graph(GraphGenConfig(n=5, n_clusters=10))
    with pytest.raises(InvalidInputError):
        gen_cluster_graph(GraphGenConfig(n=20, p_intra=1.5))


def test_gaussian_mixture_shapes():
    X, labels = gen_gaussian_mixture(100, d=3, n_clusters=4, seed=1)
    assert X.shape == (100, 3) and set(labels) == {0, 1, 2, 3}


def test_demand_balanced_full():
    np.testing.assert_array_equal(sample_demand(10, "balanced", 10, seed=3), np.arange(10))


def test_demand_imbalanced_membership():
    labels = np.repeat(np.arange(10), 30)
    d = sample_demand(300, "imbalanced", 40, labels, seed=1, clusters=[0, 8])
    assert set(labels[d]) <= {0, 8} and len(set(d)) == 40


def test_demand_default_two_largest():
    labels = np.array([0] * 5 + [1] * 9 + [2] * 7 + [3] * 9)
    assert two_largest_clusters(labels) == (1, 3)
    d = sample_demand(labels.size, "imbalanced", 18, labels, seed=0)
    assert set(labels[d]) == {1, 3}


def test_demand_deterministic_and_errors():
    a = sample_demand(100, "balanced", 20, seed=5)
    b = sample_demand(100, "balanced", 20, seed=5)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(InvalidInputError):
        sample_demand(10, "balanced", 11)
    with pytest.raises(InvalidInputError):
        sample_demand(10, "imbalanced", 5, np.repeat([0, 1, 2, 3, 4], 2))
    with pytest.raises(InvalidInputError):
        sample_demand(10, "skewed", 3)


def brute_iteration_cost(costs, window):
    means = [sum(costs[i:i + window]) / window for i in range(len(costs) - window + 1)]
    best = min(means)
    return next(i for i, m in enumerate(means) if m == best) + 1


def test_iteration_cost_decreasing():
    assert iteration_cost(list(range(20, 0, -1)), 5) == 16


def test_iteration_cost_constant():
    assert iteration_cost([3.0] * 20) == 1


def test_iteration_cost_dip():
    seq = [10, 9, 8, 1, 8, 8, 8, 8, 8, 8, 8, 8]
    assert iteration_cost(seq) == brute_iteration_cost(seq, 5)
    assert iteration_cost(seq) in (1, 2, 3, 4)


@pytest.mark.parametrize("seed", range(20))
def test_iteration_cost_random(seed):
    seq = np.random.default_rng(seed).integers(0, 6, size=21).astype(float).tolist()
    assert iteration_cost(seq) == brute_iteration_cost(seq, 5)
    np.testing.assert_allclose(moving_average(seq, 5),
                               [np.mean(seq[i:i + 5]) for i in range(17)])


def test_iteration_cost_too_short():
    with pytest.raises(InvalidInputError):
        iteration_cost([1, 2, 3])


def tiny_config(tmp_path, **over):
    p = tmp_path / "six.csv"
    p.write_text("0,0\n1,0\n0,1\n10,10\n11,10\n10,11\n")
    raw = {"dataset": {"kind": "vector-csv", "path": str(p)}, "methods": ["NDP-rand"], "k": [2],
           "demand_size": 6, "repetitions": 1}
    raw.update(over)
    return ExperimentConfig.from_dict(raw)


def test_one_cell_report(tmp_path):
    report = run_experiment(tiny_config(tmp_path))
    assert len(report.cells) == 1 and report.cells[0].status == "ok"
    jpath, cpath = report.write(tmp_path / "out")
    rows = list(csv.reader(cpath.open()))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 2
    assert jpath.exists()


def test_all_methods_reproducible(tmp_path):
    cfg = tiny_config(tmp_path, methods=["NDP-rand", "NDP-kmedianpp", "NDP-HST", "DP-rand",
                                         "DP-kmedianpp", "DP-HST"], k=[1, 2], repetitions=2, T=5)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert len(a.cells) == 6 * 2 * 2
    assert all(c.status == "ok" for c in a.cells)
    fields = ("init_cost", "final_cost", "avg_cost", "best_cost", "iter_cost")
    for x, y in zip(a.cells, b.cells):
        assert [getattr(x, f) for f in fields] == [getattr(y, f) for f in fields]
    dp = [c for c in a.cells if c.method.startswith("DP")]
    assert all(c.iter_cost is not None and len(c.trace) == 6 for c in dp)


def test_threads_do_not_change_costs(tmp_path, monkeypatch):
    cfg = tiny_config(tmp_path, methods=["NDP-HST", "DP-HST"], k=[1, 2, 3], T=5, repetitions=2)
    serial = run_experiment(cfg)
    monkeypatch.setenv("HSTKM_THREADS", "4")
    threaded = run_experiment(cfg)
    assert [c.final_cost for c in serial.cells] == [c.final_cost for c in threaded.cells]


def test_failed_cell_recorded(tmp_path):
    report = run_experiment(tiny_config(tmp_path, k=[2, 7]))
    by_k = {c.k: c for c in report.cells}
    assert by_k[2].status == "ok"
    assert by_k[7].status == "failed" and "k=7" in by_k[7].error
    assert len(report.aggregate()) == 1


def test_aggregate_recomputable(tmp_path):
    report = run_experiment(tiny_config(tmp_path, methods=["NDP-rand"], k=[1, 2], repetitions=3))
    for row in report.aggregate():
        vals = [c.final_cost for c in report.cells if c.k == row["k"]]
        assert row["final_cost_mean"] == pytest.approx(np.mean(vals))
        assert row["n"] == 3


@pytest.mark.parametrize("raw, message", [
    ({"dataset": {"kind": "graph-gen", "n": 50}, "methods": ["NDP-magic"]}, "NDP-magic"),
    ({"dataset": {"kind": "graph-gen", "n": 50}, "colour": 1}, "colour"),
    ({"methods": ["NDP-rand"]}, "dataset"),
    ({"dataset": {"kind": "hdf5"}}, "dataset.kind"),
    ({"dataset": {"kind": "graph-gen", "n": 50}, "k": [0]}, "k"),
    ({"dataset": {"kind": "graph-gen", "n": 50}, "epsilon": -1}, "epsilon"),
])
def test_config_errors(raw, message):
    with pytest.raises(InvalidInputError, match=message):
        ExperimentConfig.from_dict(raw)


def test_load_generated_graph():
    data = load_dataset({"kind": "graph-gen", "n": 50, "n_clusters": 5}, seed=1)
    assert data.space.n == 50 and data.labels.shape == (50,)


def test_hst_beats_random_init_imbalanced_r1():
    cfg = ExperimentConfig.from_dict({
        "dataset": {"kind": "graph-gen", "n": 400, "r": 1.0}, "methods": ["NDP-rand", "NDP-HST"],
        "k": [5], "demand_mode": "imbalanced", "demand_size": 60, "repetitions": 10, "seed": 3})
    report = run_experiment(cfg)
    hst = {c.rep: c.init_cost for c in report.cells if c.method == "NDP-HST"}
    rnd = {c.rep: c.init_cost for c in report.cells if c.method == "NDP-rand"}
    assert sum(hst[r] <= rnd[r] for r in range(10)) >= 8
