"""Initial center selection: uniform random, k-median++ and HST-based seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import InvalidInputError, check_k, check_point_ids, make_rng
from .hst import HstTree, annotate_demand, build_hst
from .metric import MetricSpace

ORIGINS = ("random", "kmedianpp", "hst", "dp_hst", "given")


@dataclass(frozen=True)
class CenterSet:
    """An ordered set of ``k`` distinct point ids."""

    centers: tuple[int, ...]
    origin: str = "given"

    def __post_init__(self):
        centers = tuple(int(c) for c in self.centers)
        if not centers:
            raise InvalidInputError("a center set needs at least one center")
        if len(set(centers)) != len(centers):
            raise InvalidInputError(f"duplicate centers in {centers}")
        if self.origin not in ORIGINS:
            raise InvalidInputError(f"unknown center-set origin {self.origin!r}")
        object.__setattr__(self, "centers", centers)

    @property
    def k(self) -> int:
        return len(self.centers)

    def __iter__(self):
        return iter(self.centers)

    def __len__(self):
        return len(self.centers)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=np.int64)

    def swap(self, out: int, new: int) -> "CenterSet":
        return CenterSet(tuple(new if c == out else c for c in self.centers), self.origin)


def random_init(space: MetricSpace, k: int, seed=0, candidates=None) -> CenterSet:
    """``k`` distinct points drawn uniformly without replacement."""
    pool = np.arange(space.n) if candidates is None else check_point_ids(candidates, space.n, "candidates")
    k = check_k(k, pool.size)
    rng = make_rng(seed, "random_init")
    return CenterSet(tuple(pool[rng.choice(pool.size, size=k, replace=False)]), "random")


def kmedianpp_init(space: MetricSpace, k: int, seed=0, squared: bool = False,
                   candidates=None, initial=None) -> CenterSet:
    """k-median++ seeding (D-sampling; D^2-sampling when ``squared``).

    The first center is uniform over the pool; each later one is drawn with
    probability proportional to its distance (squared distance) to the
    nearest chosen center. Nearest-center distances are cached, so the cost
    is O(nk) distance evaluations. When every remaining weight is zero the
    draw falls back to uniform over the unchosen points.

    ``initial`` (point ids, all in the pool) extends an existing center set
    instead of drawing the first center.
    """
    pool = np.arange(space.n) if candidates is None else check_point_ids(candidates, space.n, "candidates")
    k = check_k(k, pool.size)
    rng = make_rng(seed, "kmedianpp")
    if initial is None:
        chosen = [int(rng.integers(pool.size))]
    else:
        ids = check_point_ids(initial, space.n, "initial")
        pos = {int(p): i for i, p in enumerate(pool)}
        if ids.size == 0 or ids.size > k or any(int(p) not in pos for p in ids):
            raise InvalidInputError("initial centers must be 1..k distinct points of the pool")
        chosen = list(dict.fromkeys(pos[int(p)] for p in ids))
    taken = np.zeros(pool.size, dtype=bool)
    taken[chosen] = True
    nearest = space.pairwise(pool[chosen], pool).min(axis=0)
    for _ in range(len(chosen), k):
        w = nearest ** 2 if squared else nearest.copy()
        w[taken] = 0.0
        total = w.sum()
        if total > 0:
            cdf = np.cumsum(w)
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            i = min(i, pool.size - 1)
            while w[i] == 0:
                i -= 1
        else:
            free = np.flatnonzero(~taken)
            i = int(free[rng.integers(free.size)])
        chosen.append(i)
        taken[i] = True
        nearest = np.minimum(nearest, space.distances_from(int(pool[i]), pool))
    return CenterSet(tuple(pool[chosen]), "kmedianpp")


def node_scores(tree: HstTree, counts) -> np.ndarray:
    return np.asarray(counts, dtype=float) * np.exp2(tree.level.astype(float))


def subtree_search(tree: HstTree, k: int, count_field: str = "universe", *,
                   counts=None, exclude_root: bool = False) -> list[int]:
    """Pick ``k`` disjoint subtree roots by score ``count * 2**level``.

    Rounds add the top ``k - |selected|`` eligible nodes, then drop every
    selected node that has a selected descendant. A node that was ever
    selected, and every ancestor of a selected node, stays ineligible.
    Equal scores go to the smaller node id.

    ``counts`` overrides the tree's own counts (used with noisy counts);
    ``exclude_root`` keeps the root out of the candidate pool.
    """
    if counts is None:
        counts = tree.counts(count_field)
    n_leaves = tree.n_points
    if k < 1 or k > n_leaves:
        raise InvalidInputError(f"k={k} must be in [1, {n_leaves}] (number of leaves)")
    scores = node_scores(tree, counts)
    order = np.lexsort((np.arange(tree.n_nodes), -scores))
    blocked = np.zeros(tree.n_nodes, dtype=bool)
    if exclude_root:
        blocked[tree.root] = True
    selected: list[int] = []
    in_sel = np.zeros(tree.n_nodes, dtype=bool)
    ptr = 0
    while len(selected) < k:
        batch = []
        need = k - len(selected)
        while len(batch) < need and ptr < order.size:
            v = int(order[ptr])
            ptr += 1
            if not blocked[v]:
                batch.append(v)
        if not batch:
            raise InvalidInputError("subtree search ran out of eligible nodes")
        for v in batch:
            in_sel[v] = True
            blocked[v] = True
        for v in batch:
            for a in tree.ancestors(v):
                if in_sel[a]:
                    in_sel[a] = False
                elif blocked[a]:
                    break
                blocked[a] = True
        selected = [v for v in selected + batch if in_sel[v]]
    return selected


def find_leaf(tree: HstTree, roots, count_field: str = "universe", *, counts=None) -> list[int]:
    """Greedy descent from each root into the child with the largest count.

    Ties fall to the larger universe count, then to the smaller node id.
    Returns one point id per root, in root order.
    """
    if counts is None:
        counts = tree.counts(count_field)
    counts = np.asarray(counts, dtype=float)
    secondary = tree.n_universe
    centers = []
    for v in roots:
        v = int(v)
        while tree.leaf_point[v] < 0:
            ch = tree.children[v]
            # lexsort: last key is primary
            best = np.lexsort((ch, -secondary[ch], -counts[ch]))[0]
            v = int(ch[best])
        centers.append(int(tree.leaf_point[v]))
    return centers


def hst_seed(tree: HstTree, k: int, count_field: str = "universe"):
    """Run subtree search and leaf search on a built tree.

    Returns ``(roots, centers)``.
    """
    roots = subtree_search(tree, k, count_field)
    centers = find_leaf(tree, roots, count_field)
    return roots, CenterSet(tuple(centers), "hst")


def hst_init(space: MetricSpace, k: int, L="auto", seed=0, demand=None) -> CenterSet:
    """HST initialization: build a 2-HST, search subtrees, then descend to leaves.

    With ``demand`` given, subtree and leaf search use demand counts instead
    of universe counts (the tree is still built on the whole space).
    """
    k = check_k(k, space.n)
    tree = build_hst(space, L, seed)
    field = "universe"
    if demand is not None:
        tree = annotate_demand(tree, demand)
        field = "demand"
    return hst_seed(tree, k, field)[1]
