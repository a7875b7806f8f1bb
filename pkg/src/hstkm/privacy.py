"""Differentially private seeding and local search.

Randomness comes from numpy Generators keyed by an integer seed, which makes
runs reproducible for research. That is not a privacy-faithful deployment
mode: pass ``secure=True`` (or ``seed=None``) to draw noise from OS entropy.
Laplace noise uses floating-point inverse-CDF sampling; its known
floating-point side channels are not addressed here.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import (InvalidInputError, check_k, check_point_ids, check_positive_float,
                          check_positive_int, make_rng)
from .hst import HstTree, annotate_demand, build_hst
from .local_search import CostTrace, SwapEvaluator
from .metric import MetricSpace
from .seeding import CenterSet, find_leaf, kmedianpp_init, random_init, subtree_search

_LEDGER_TOL = 1e-12


class PrivacyBudgetExceeded(RuntimeError):
    pass


@dataclass
class PrivacyBudget:
    """Total epsilon and the record of what each mechanism spent."""

    epsilon_total: float
    ledger: list[tuple[str, float]] = field(default_factory=list)

    @property
    def spent(self) -> float:
        return float(sum(e for _, e in self.ledger))

    @property
    def remaining(self) -> float:
        return self.epsilon_total - self.spent

    def spend(self, component: str, epsilon: float) -> None:
        if epsilon < 0:
            raise InvalidInputError(f"cannot spend negative epsilon ({epsilon})")
        if self.spent + epsilon > self.epsilon_total + _LEDGER_TOL:
            raise PrivacyBudgetExceeded(
                f"{component} needs {epsilon:g} but only {self.remaining:g} of "
                f"{self.epsilon_total:g} is left")
        self.ledger.append((component, float(epsilon)))

    def to_list(self) -> list[dict]:
        return [{"component": c, "epsilon": e} for c, e in self.ledger]

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_list(), **kwargs)


def laplace_noise(scale, rng, size=None):
    """Laplace(0, scale) samples by inverse CDF.

    ``scale`` may be an array (one sample per entry, ``size`` ignored).
    """
    b = np.asarray(scale, dtype=float)
    if np.any(~np.isfinite(b)) or np.any(b <= 0):
        raise InvalidInputError(f"Laplace scale must be positive and finite, got {scale!r}")
    shape = b.shape if b.ndim else size
    u = rng.random(shape) - 0.5
    x = -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(x) if np.ndim(x) == 0 else x


def exponential_mechanism(utilities, eps_prime: float, rng) -> int:
    """Sample index ``i`` with probability proportional to ``exp(eps_prime * u_i)``.

    Sensitivity and the factor 2 are expected to be folded into
    ``eps_prime`` by the caller.
    """
    u = np.asarray(utilities, dtype=float).ravel()
    if u.size == 0:
        raise InvalidInputError("exponential mechanism needs at least one outcome")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("utilities must be finite")
    eps_prime = check_positive_float(eps_prime, "eps_prime", allow_zero=True)
    logits = eps_prime * (u - u.max())
    w = np.exp(logits)
    cdf = np.cumsum(w)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, u.size - 1)


def exponential_probabilities(utilities, eps_prime: float) -> np.ndarray:
    u = np.asarray(utilities, dtype=float).ravel()
    w = np.exp(eps_prime * (u - u.max()))
    return w / w.sum()


def _rng(seed, secure: bool, *keys):
    return make_rng(None if secure else seed, *keys)


def noisy_counts(tree: HstTree, epsilon: float, rng, exponent_divisor: float = 1.0) -> np.ndarray:
    """Demand counts plus Laplace noise of scale ``2**((L - level)/divisor) / epsilon``.

    The root is left untouched; it never enters the private search.
    """
    counts = tree.counts("demand").astype(float)
    scales = np.exp2((tree.L - tree.level) / exponent_divisor) / epsilon
    noise = laplace_noise(scales, rng)
    noise[tree.root] = 0.0
    return counts + noise


def level_spends(L: int, epsilon: float, exponent_divisor: float = 1.0) -> list[tuple[int, float]]:
    return [(h, epsilon / 2.0 ** ((L - h) / exponent_divisor)) for h in range(L - 1, -1, -1)]


@dataclass
class DpInitResult:
    centers: CenterSet
    budget: PrivacyBudget
    roots: list[int]
    noisy: np.ndarray = field(repr=False)
    tree: HstTree = field(repr=False)


def dp_hst_init(space: MetricSpace, demand, k: int, epsilon: float, L=8, seed=0, *,
                tree: HstTree | None = None, exponent_divisor: float = 1.0,
                secure: bool = False) -> DpInitResult:
    """Private HST seeding on the demand set.

    The tree is built on the public universe. Each non-root node's demand
    count gets Laplace noise of scale ``2**(L - level) / epsilon``; subtree
    search and leaf search then run on the noisy counts. Nodes on one level
    cover disjoint point sets, so level ``h`` costs ``epsilon / 2**(L - h)``
    and the whole run costs ``(1 - 2**-L) * epsilon``.

    ``tree`` lets callers reuse a prebuilt public tree.
    """
    epsilon = check_positive_float(epsilon, "epsilon")
    ids = check_point_ids(demand, space.n, "demand")
    if ids.size == 0:
        raise InvalidInputError("demand set is empty")
    k = check_k(k, space.n)
    if tree is None:
        tree = build_hst(space, L, seed)
    tree = annotate_demand(tree, ids)
    budget = PrivacyBudget(epsilon)
    for h, eps_h in level_spends(tree.L, epsilon, exponent_divisor):
        budget.spend(f"dp_hst_init/level_{h}", eps_h)
    noisy = noisy_counts(tree, epsilon, _rng(seed, secure, "dp_hst_noise"), exponent_divisor)
    roots = subtree_search(tree, k, counts=noisy, exclude_root=tree.n_points > 1)
    centers = find_leaf(tree, roots, counts=noisy)
    return DpInitResult(CenterSet(tuple(centers), "dp_hst"), budget, roots, noisy, tree)


@dataclass
class DpSearchResult:
    centers: CenterSet
    trace: CostTrace
    budget: PrivacyBudget
    selected_index: int
    eps_prime: float
    init_seconds: float = 0.0


def dp_local_search(space: MetricSpace, demand, k: int, epsilon: float, T: int = 20, seed=0, *,
                    init="hst", L=8, objective: str = "median", universe=None,
                    sensitivity: float | None = None, tree: HstTree | None = None,
                    secure: bool = False) -> DpSearchResult:
    """Private local search driven by the exponential mechanism.

    Half the budget goes to the initial centers (``init="hst"``: private HST
    seeding; ``"random"`` / ``"kmedianpp"`` run on the public universe and
    spend nothing; a :class:`CenterSet` is taken as public). With
    ``eps' = epsilon / (4 * sensitivity * (T + 1))``, each of the ``T`` steps
    samples a swap with weight ``exp(-eps' * cost)`` and the output set is
    sampled from the ``T + 1`` visited sets with the same weights.
    ``sensitivity`` defaults to the diameter of the space.
    """
    epsilon = check_positive_float(epsilon, "epsilon")
    T = check_positive_int(T, "T")
    ids = check_point_ids(demand, space.n, "demand")
    if ids.size == 0:
        raise InvalidInputError("demand set is empty")
    k = check_k(k, space.n)
    cand = None if universe is None else check_point_ids(universe, space.n, "universe")
    if sensitivity is None:
        sensitivity = space.diameter
    sensitivity = check_positive_float(sensitivity, "sensitivity")

    budget = PrivacyBudget(epsilon)
    t0 = time.perf_counter()
    if isinstance(init, CenterSet):
        current = init
        budget.spend("init/given", 0.0)
    elif init == "hst":
        res = dp_hst_init(space, ids, k, epsilon / 2, L, seed, tree=tree, secure=secure)
        current = res.centers
        budget.spend("init/dp_hst", epsilon / 2)
    elif init == "random":
        current = random_init(space, k, _rng(seed, secure, "dp_init"), candidates=cand)
        budget.spend("init/random", 0.0)
    elif init == "kmedianpp":
        current = kmedianpp_init(space, k, _rng(seed, secure, "dp_init"), candidates=cand,
                                 squared=objective == "means")
        budget.spend("init/kmedianpp", 0.0)
    else:
        raise InvalidInputError(f"unknown init {init!r}")
    init_seconds = time.perf_counter() - t0
    if current.k != k:
        raise InvalidInputError(f"initial center set has {current.k} centers, expected {k}")

    eps_prime = epsilon / (4.0 * sensitivity * (T + 1))
    step_eps = 2.0 * sensitivity * eps_prime
    rng = _rng(seed, secure, "dp_local_search")
    ev = SwapEvaluator(space, ids, objective, cand)
    sets = [current]
    costs = [ev.cost(current)]
    swaps = []
    for t in range(T):
        xs, ys, table = ev.swap_costs(current)
        if ys.size == 0:
            raise InvalidInputError("no swap candidates: k equals the universe size")
        flat = exponential_mechanism(-table.ravel(), eps_prime, rng)
        i, j = divmod(flat, table.shape[1])
        x, y = int(xs[i]), int(ys[j])
        current = current.swap(x, y)
        budget.spend(f"local_search/step_{t + 1}", step_eps)
        swaps.append((x, y))
        sets.append(current)
        costs.append(ev.cost(current))
    j = exponential_mechanism(-np.asarray(costs), eps_prime, rng)
    budget.spend("local_search/output", step_eps)
    trace = CostTrace(costs, swaps, sets[j], T, objective,
                      seed=None if secure else seed, epsilon=epsilon, center_sets=sets)
    return DpSearchResult(sets[j], trace, budget, j, eps_prime, init_seconds)
