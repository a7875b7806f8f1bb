"""k-median / k-means cost and single-swap local search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import InvalidInputError, check_point_ids, check_positive_float, check_positive_int
from .metric import MetricSpace
from .seeding import CenterSet

OBJECTIVES = ("median", "means")


def check_objective(objective: str) -> str:
    if objective not in OBJECTIVES:
        raise InvalidInputError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    return objective


@dataclass
class CostTrace:
    """Costs of successive center sets (the first entry is the initial cost)."""

    per_iteration_costs: list[float]
    swaps: list[tuple[int, int]]
    final: CenterSet
    iterations: int
    objective: str = "median"
    seed: int | None = None
    epsilon: float | None = None
    center_sets: list[CenterSet] = field(default_factory=list, repr=False)

    @property
    def initial_cost(self) -> float:
        return self.per_iteration_costs[0]

    @property
    def final_cost(self) -> float:
        return self.per_iteration_costs[-1]

    def to_dict(self) -> dict:
        return {
            "per_iteration_costs": list(self.per_iteration_costs),
            "swaps": [list(s) for s in self.swaps],
            "final": list(self.final.centers),
            "iterations": self.iterations,
            "objective": self.objective,
            "seed": self.seed,
            "epsilon": self.epsilon,
        }


def _demand_ids(space: MetricSpace, demand) -> np.ndarray:
    if demand is None:
        return np.arange(space.n)
    ids = check_point_ids(demand, space.n, "demand")
    if ids.size == 0:
        raise InvalidInputError("demand set is empty")
    return ids


def _center_ids(space: MetricSpace, centers) -> np.ndarray:
    ids = centers.as_array() if isinstance(centers, CenterSet) else check_point_ids(centers, space.n, "centers")
    if ids.size == 0:
        raise InvalidInputError("center set is empty")
    return ids


def cost(space: MetricSpace, centers, demand=None, objective: str = "median") -> float:
    """Sum over demand points of the (squared) distance to the nearest center."""
    check_objective(objective)
    c = _center_ids(space, centers)
    d = _demand_ids(space, demand)
    near = space.pairwise(c, d).min(axis=0)
    if objective == "means":
        near = near ** 2
    return float(near.sum())


class SwapEvaluator:
    """Cost of every single swap ``(x out, y in)`` for a fixed demand set.

    Keeps the nearest and second-nearest center distance of each demand
    point, so a full scan costs O(n |D|) instead of O(k n |D|).
    Distances to the demand set are cached as an ``n x |D|`` block.
    """

    def __init__(self, space: MetricSpace, demand=None, objective: str = "median",
                 candidates=None):
        self.space = space
        self.objective = check_objective(objective)
        self.demand = _demand_ids(space, demand)
        self.candidates = np.arange(space.n) if candidates is None else check_point_ids(candidates, space.n)
        block = space.pairwise(None, self.demand)
        self.block = block ** 2 if objective == "means" else block

    def cost(self, centers) -> float:
        c = _center_ids(self.space, centers)
        return float(self.block[c].min(axis=0).sum())

    def swap_costs(self, centers):
        """Return ``(xs, ys, costs)``.

        ``xs`` are the current centers sorted by id, ``ys`` the candidate
        points outside the center set sorted by id, and ``costs[i, j]`` the
        cost after replacing ``xs[i]`` by ``ys[j]``.
        """
        xs = np.sort(_center_ids(self.space, centers))
        k = xs.size
        sub = self.block[xs]
        if k == 1:
            d1 = sub[0]
            d2 = np.full_like(d1, np.inf)
            owner = np.zeros(d1.size, dtype=np.int64)
        else:
            part = np.argpartition(sub, 1, axis=0)
            owner = part[0]
            cols = np.arange(sub.shape[1])
            d1 = sub[owner, cols]
            d2 = sub[part[1], cols]
        ys = np.setdiff1d(self.candidates, xs)
        cand = self.block[ys]
        keep = np.minimum(cand, d1)
        base = keep.sum(axis=1)
        extra = np.minimum(cand, d2) - keep
        onehot = np.zeros((d1.size, k))
        onehot[np.arange(d1.size), owner] = 1.0
        if k == 1:
            costs = (base + extra.sum(axis=1))[None, :]
        else:
            costs = base[None, :] + (extra @ onehot).T
        return xs, ys, costs

    def naive_swap_costs(self, centers):
        """Same contract as :meth:`swap_costs`, by full re-evaluation."""
        xs = np.sort(_center_ids(self.space, centers))
        ys = np.setdiff1d(self.candidates, xs)
        costs = np.empty((xs.size, ys.size))
        for i, x in enumerate(xs):
            rest = xs[xs != x]
            for j, y in enumerate(ys):
                costs[i, j] = self.block[np.append(rest, y)].min(axis=0).sum()
        return xs, ys, costs


def best_swap(costs: np.ndarray) -> tuple[int, int]:
    """Index of the minimum; ties go to the smallest (row, column)."""
    flat = int(np.argmin(costs))
    return divmod(flat, costs.shape[1])


def local_search(space: MetricSpace, demand, init, alpha: float = 1e-3, max_iter: int = 20,
                 objective: str = "median", candidates=None) -> CostTrace:
    """Single-swap local search.

    Every iteration evaluates all swaps of a center for a non-center point
    and applies the cheapest one if it lowers the cost by at least a factor
    ``1 - alpha / k``. Stops when no swap qualifies or after ``max_iter``
    swaps.
    """
    alpha = check_positive_float(alpha, "alpha")
    max_iter = check_positive_int(max_iter, "max_iter", minimum=0)
    ev = SwapEvaluator(space, demand, objective, candidates)
    current = init if isinstance(init, CenterSet) else CenterSet(tuple(init))
    _center_ids(space, current)
    k = current.k
    costs = [ev.cost(current)]
    swaps = []
    sets = [current]
    while len(swaps) < max_iter:
        xs, ys, table = ev.swap_costs(current)
        if ys.size == 0:
            break
        i, j = best_swap(table)
        new_cost = float(table[i, j])
        if not (new_cost <= (1 - alpha / k) * costs[-1] and new_cost < costs[-1]):
            break
        x, y = int(xs[i]), int(ys[j])
        current = current.swap(x, y)
        swaps.append((x, y))
        sets.append(current)
        # recompute exactly rather than trusting the incremental sum
        costs.append(ev.cost(current))
    return CostTrace(costs, swaps, current, len(swaps), objective, center_sets=sets)
