"""Synthetic data, demand sampling and the experiment sweep.

A sweep runs every (method, k, repetition) cell. Each repetition owns one
dataset and one demand set shared by all methods and k values; every cell
derives its own seed, so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._validation import InvalidInputError, check_positive_float, check_positive_int, make_rng
from .local_search import OBJECTIVES, SwapEvaluator, local_search
from .metric import (MetricSpace, build_graph_metric, build_vector_metric, read_edge_list,
                     read_vector_csv)
from .privacy import dp_local_search
from .seeding import hst_seed, kmedianpp_init, random_init
from .hst import annotate_demand, build_hst

logger = logging.getLogger(__name__)

METHODS = ("NDP-rand", "NDP-kmedianpp", "NDP-HST", "DP-rand", "DP-kmedianpp", "DP-HST")
DP_METHODS = ("DP-rand", "DP-kmedianpp", "DP-HST")
CSV_COLUMNS = ("method", "k", "rep", "init_cost", "final_cost", "avg_cost", "iter_cost", "wall_ms")


@dataclass
class GraphGenConfig:
    n: int
    n_clusters: int = 10
    p_intra: float = 0.2
    r: float = 100.0
    p_inter: float = 0.01
    seed: int = 0
    max_regenerations: int = 10


@dataclass
class GeneratedGraph:
    n: int
    edges: np.ndarray          # (m, 3) rows of (u, v, w)
    labels: np.ndarray
    patched: bool = False

    def edge_list(self):
        return [(int(u), int(v), float(w)) for u, v, w in self.edges]


def _draw_graph(cfg: GraphGenConfig, rng, labels):
    n = cfg.n
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    p = np.where(same, cfg.p_intra, cfg.p_inter)
    on = rng.random(iu.size) < p
    # U(0, 1] keeps weights strictly positive
    w_intra = 1.0 - rng.random(iu.size)
    w_inter = rng.uniform(0.5, cfg.r, iu.size)
    w = np.where(same, w_intra, w_inter)
    return np.column_stack([iu[on], ju[on], w[on]]).astype(float)


def gen_cluster_graph(cfg: GraphGenConfig) -> GeneratedGraph:
    """Random planted-cluster graph.

    Nodes are shuffled and split into ``n_clusters`` near-equal clusters.
    Intra-cluster pairs connect with probability ``p_intra`` and weight
    U(0, 1]; inter-cluster pairs with probability ``p_inter`` and weight
    U(0.5, r). A disconnected draw is regenerated up to
    ``max_regenerations`` times, after which components are chained together
    with extra U(0.5, r) edges.
    """
    check_positive_int(cfg.n_clusters, "n_clusters")
    if cfg.n < cfg.n_clusters:
        raise InvalidInputError(f"n={cfg.n} is smaller than n_clusters={cfg.n_clusters}")
    if cfg.r < 0.5:
        raise InvalidInputError(f"r must be >= 0.5, got {cfg.r}")
    for name in ("p_intra", "p_inter"):
        p = getattr(cfg, name)
        if not 0 <= p <= 1:
            raise InvalidInputError(f"{name} must be in [0, 1], got {p}")
    rng = make_rng(cfg.seed, "graph")
    labels = np.empty(cfg.n, dtype=np.int64)
    for c, part in enumerate(np.array_split(rng.permutation(cfg.n), cfg.n_clusters)):
        labels[part] = c
    for attempt in range(cfg.max_regenerations + 1):
        edges = _draw_graph(cfg, rng, labels)
        comp = _components(cfg.n, edges)
        if comp.max() == 0:
            return GeneratedGraph(cfg.n, edges, labels)
    logger.info("graph still disconnected after %d draws; patching", cfg.max_regenerations + 1)
    extra = []
    n_comp = comp.max() + 1
    reps = [rng.choice(np.flatnonzero(comp == c)) for c in range(n_comp)]
    for a, b in zip(reps[:-1], reps[1:]):
        extra.append((min(a, b), max(a, b), rng.uniform(0.5, cfg.r)))
    edges = np.vstack([edges, np.asarray(extra, dtype=float)])
    return GeneratedGraph(cfg.n, edges, labels, patched=True)


def _components(n, edges):
    if edges.size == 0:
        return np.arange(n)
    g = coo_matrix((np.ones(len(edges)), (edges[:, 0].astype(int), edges[:, 1].astype(int))),
                   shape=(n, n))
    return connected_components(g, directed=False)[1]


def gen_gaussian_mixture(n: int, d: int = 2, n_clusters: int = 10, spread: float = 10.0,
                         std: float = 1.0, seed: int = 0):
    """Isotropic Gaussian blobs with centers drawn uniformly in a cube of side ``spread``."""
    rng = make_rng(seed, "gmm")
    means = rng.uniform(0, spread, size=(n_clusters, d))
    labels = np.empty(n, dtype=np.int64)
    for c, part in enumerate(np.array_split(rng.permutation(n), n_clusters)):
        labels[part] = c
    X = means[labels] + rng.normal(0, std, size=(n, d))
    return X, labels


def two_largest_clusters(labels) -> tuple[int, int]:
    values, counts = np.unique(np.asarray(labels), return_counts=True)
    order = np.lexsort((values, -counts))
    if order.size < 2:
        raise InvalidInputError("imbalanced demand needs at least two clusters")
    return int(values[order[0]]), int(values[order[1]])


def sample_demand(n: int, mode: str, size: int, cluster_labels=None, seed: int = 0,
                  clusters=None) -> np.ndarray:
    """Demand set drawn without replacement, returned sorted.

    ``balanced`` samples from all ``n`` points; ``imbalanced`` only from the
    points of two clusters (the two largest unless ``clusters`` is given).
    """
    size = check_positive_int(size, "demand size")
    rng = make_rng(seed, "demand")
    if mode == "balanced":
        pool = np.arange(n)
    elif mode == "imbalanced":
        if cluster_labels is None:
            raise InvalidInputError("imbalanced demand needs cluster labels")
        labels = np.asarray(cluster_labels)
        if labels.shape[0] != n:
            raise InvalidInputError(f"got {labels.shape[0]} labels for {n} points")
        pick = two_largest_clusters(labels) if clusters is None else tuple(clusters)
        pool = np.flatnonzero(np.isin(labels, pick))
    else:
        raise InvalidInputError(f"demand mode must be 'balanced' or 'imbalanced', got {mode!r}")
    if size > pool.size:
        raise InvalidInputError(f"demand size {size} exceeds the {pool.size} available points")
    return np.sort(rng.choice(pool, size=size, replace=False))


def moving_average(costs, window: int = 5) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    return np.lib.stride_tricks.sliding_window_view(c, window).mean(axis=1)


def iteration_cost(costs, window: int = 5) -> int:
    """1-based start index of the window whose mean cost is smallest (first on ties)."""
    window = check_positive_int(window, "window")
    if len(costs) < window:
        raise InvalidInputError(f"need at least {window} costs, got {len(costs)}")
    return int(np.argmin(moving_average(costs, window))) + 1


@dataclass
class ExperimentConfig:
    dataset: dict
    methods: list = field(default_factory=lambda: list(METHODS))
    k: list = field(default_factory=lambda: [2, 5, 10, 15, 20])
    demand_mode: str = "balanced"
    demand_size: int = 500
    demand_clusters: list | None = None
    epsilon: float = 1.0
    T: int = 20
    repetitions: int = 10
    objective: str = "median"
    seed: int = 0
    alpha: float = 1e-3
    max_iter: int = 20
    L_ndp: object = 6
    L_dp: object = 8

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise InvalidInputError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise InvalidInputError(f"unknown config field(s): {', '.join(unknown)}")
        if "dataset" not in raw:
            raise InvalidInputError("config field 'dataset' is required")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    def validate(self) -> None:
        if not isinstance(self.dataset, dict) or "kind" not in self.dataset:
            raise InvalidInputError("dataset: must be an object with a 'kind' field")
        if self.dataset["kind"] not in DATASET_KINDS:
            raise InvalidInputError(f"dataset.kind: unknown kind {self.dataset['kind']!r}; "
                                    f"expected one of {DATASET_KINDS}")
        if not isinstance(self.methods, list) or not self.methods:
            raise InvalidInputError("methods: must be a non-empty list")
        for m in self.methods:
            if m not in METHODS:
                raise InvalidInputError(f"methods: unknown method {m!r}; expected one of {METHODS}")
        if not isinstance(self.k, list) or not self.k:
            raise InvalidInputError("k: must be a non-empty list")
        for k in self.k:
            check_positive_int(k, "k")
        if self.demand_mode not in ("balanced", "imbalanced"):
            raise InvalidInputError(f"demand_mode: must be 'balanced' or 'imbalanced'")
        check_positive_int(self.demand_size, "demand_size")
        check_positive_float(self.epsilon, "epsilon")
        check_positive_int(self.T, "T")
        check_positive_int(self.repetitions, "repetitions")
        check_positive_float(self.alpha, "alpha")
        check_positive_int(self.max_iter, "max_iter", minimum=0)
        if self.objective not in OBJECTIVES:
            raise InvalidInputError(f"objective: must be one of {OBJECTIVES}")
        for name in ("L_ndp", "L_dp"):
            val = getattr(self, name)
            if val != "auto":
                check_positive_int(val, name)
        if self.T + 1 < 5 and any(m in DP_METHODS for m in self.methods):
            raise InvalidInputError("T: DP methods need T >= 4 for the window-5 iteration cost")


DATASET_KINDS = ("graph-gen", "graph-file", "vector-csv", "gaussian-mixture")


@dataclass
class Dataset:
    space: MetricSpace
    labels: np.ndarray | None


def load_dataset(spec: dict, seed: int) -> Dataset:
    """Materialize one dataset from a config ``dataset`` block."""
    kind = spec["kind"]
    opts = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "graph-gen":
            g = gen_cluster_graph(GraphGenConfig(seed=seed, **opts))
            return Dataset(build_graph_metric(g.edges, g.n), g.labels)
        if kind == "gaussian-mixture":
            norm = opts.pop("norm", "l2")
            X, labels = gen_gaussian_mixture(seed=seed, **opts)
            return Dataset(build_vector_metric(X, norm), labels)
        labels = None
        if "labels" in opts:
            labels = np.loadtxt(opts.pop("labels"), dtype=np.int64, ndmin=1)
        if kind == "graph-file":
            edges, n = read_edge_list(opts.pop("path"))
            return Dataset(build_graph_metric(edges, n), labels)
        if kind == "vector-csv":
            X = read_vector_csv(opts.pop("path"))
            return Dataset(build_vector_metric(X, opts.pop("norm", "l2")), labels)
    except TypeError as exc:
        raise InvalidInputError(f"dataset: {exc}") from None
    except KeyError as exc:
        raise InvalidInputError(f"dataset: missing field {exc}") from None
    raise InvalidInputError(f"dataset.kind: unknown kind {kind!r}")


@dataclass
class Cell:
    method: str
    k: int
    rep: int
    status: str = "ok"
    error: str | None = None
    init_cost: float | None = None
    final_cost: float | None = None
    avg_cost: float | None = None
    best_cost: float | None = None
    iter_cost: int | None = None
    wall_ms: float | None = None
    trace: list | None = None


@dataclass
class CostReport:
    config: dict
    cells: list

    def ok_cells(self):
        return [c for c in self.cells if c.status == "ok"]

    def aggregate(self) -> list[dict]:
        """Mean and standard deviation per (method, k) over repetitions."""
        groups: dict = {}
        for c in self.ok_cells():
            groups.setdefault((c.method, c.k), []).append(c)
        out = []
        for (m, k), cells in sorted(groups.items(), key=lambda kv: (METHODS.index(kv[0][0]), kv[0][1])):
            row = {"method": m, "k": k, "n": len(cells)}
            for name in ("init_cost", "final_cost", "avg_cost", "best_cost", "iter_cost", "wall_ms"):
                vals = [getattr(c, name) for c in cells if getattr(c, name) is not None]
                row[f"{name}_mean"] = float(np.mean(vals)) if vals else None
                row[f"{name}_std"] = float(np.std(vals)) if vals else None
            out.append(row)
        return out

    def to_dict(self) -> dict:
        return {"config": self.config, "cells": [asdict(c) for c in self.cells],
                "aggregate": self.aggregate()}

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath = out / "report.json"
        cpath = out / "report.csv"
        jpath.write_text(json.dumps(self.to_dict(), indent=2))
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for c in self.cells:
                w.writerow([_csv(getattr(c, col)) for col in CSV_COLUMNS])
        return jpath, cpath


def _csv(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _max_workers() -> int:
    raw = os.environ.get("HSTKM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidInputError(f"HSTKM_THREADS must be an integer, got {raw!r}") from None


def _run_cell(cfg: ExperimentConfig, data: Dataset, demand: np.ndarray, method: str, k: int,
              rep: int) -> Cell:
    cell = Cell(method, int(k), rep)
    seed = int(make_rng(cfg.seed, "cell", method, k, rep).integers(2**31))
    space = data.space
    squared = cfg.objective == "means"
    try:
        if method in DP_METHODS:
            init = {"DP-rand": "random", "DP-kmedianpp": "kmedianpp", "DP-HST": "hst"}[method]
            res = dp_local_search(space, demand, k, cfg.epsilon, cfg.T, seed, init=init,
                                  L=cfg.L_dp, objective=cfg.objective)
            costs = res.trace.per_iteration_costs
            cell.wall_ms = res.init_seconds * 1e3
            cell.init_cost = costs[0]
            cell.final_cost = SwapEvaluator(space, demand, cfg.objective).cost(res.centers)
            cell.avg_cost = float(np.mean(costs))
            cell.best_cost = float(np.min(costs))
            cell.iter_cost = iteration_cost(costs, 5)
            cell.trace = list(costs)
        else:
            t0 = time.perf_counter()
            if method == "NDP-rand":
                init = random_init(space, k, seed, candidates=demand)
            elif method == "NDP-kmedianpp":
                init = kmedianpp_init(space, k, seed, squared=squared, candidates=demand)
            else:
                tree = annotate_demand(build_hst(space, cfg.L_ndp, seed), demand)
                init = hst_seed(tree, k, "demand")[1]
            cell.wall_ms = (time.perf_counter() - t0) * 1e3
            trace = local_search(space, demand, init, cfg.alpha, cfg.max_iter, cfg.objective)
            costs = trace.per_iteration_costs
            cell.init_cost = costs[0]
            cell.final_cost = costs[-1]
            cell.avg_cost = float(np.mean(costs))
            cell.best_cost = float(np.min(costs))
            cell.trace = list(costs)
    except Exception as exc:  # a failing cell must not abort the sweep
        logger.warning("cell %s k=%s rep=%s failed: %s", method, k, rep, exc)
        cell.status = "failed"
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def run_experiment(cfg: ExperimentConfig, progress=None) -> CostReport:
    """Run every configured (method, k, repetition) cell.

    Cost fields are a deterministic function of the config; ``wall_ms`` is
    not. ``HSTKM_THREADS`` caps the number of worker threads.
    """
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    cfg.validate()
    cells: dict = {}
    jobs = []
    for rep in range(cfg.repetitions):
        data_seed = int(make_rng(cfg.seed, "data", rep).integers(2**31))
        data = load_dataset(cfg.dataset, data_seed)
        try:
            demand = sample_demand(data.space.n, cfg.demand_mode, cfg.demand_size, data.labels,
                                   int(make_rng(cfg.seed, "demand", rep).integers(2**31)),
                                   cfg.demand_clusters)
        except InvalidInputError as exc:
            for m in cfg.methods:
                for k in cfg.k:
                    cells[(m, k, rep)] = Cell(m, int(k), rep, status="failed", error=str(exc))
            continue
        for m in cfg.methods:
            for k in cfg.k:
                jobs.append((data, demand, m, k, rep))

    def work(job):
        data, demand, m, k, rep = job
        return _run_cell(cfg, data, demand, m, k, rep)

    workers = _max_workers()
    if workers == 1:
        results = map(work, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(work, jobs)
    for cell in results:
        cells[(cell.method, cell.k, cell.rep)] = cell
        if progress is not None:
            progress(cell)
    if workers > 1:
        pool.shutdown()
    ordered = [cells[key] for key in sorted(
        cells, key=lambda t: (METHODS.index(t[0]), t[1], t[2]))]
    return CostReport(asdict(cfg), ordered)
