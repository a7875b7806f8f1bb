"""2-HST construction by recursive randomized ball carving.

The root sits at level ``L`` and holds every point. Each cluster at level
``i + 1`` is split into balls of radius ``diameter / 2**(L - i + 1)`` around
centers taken in a random order, so every node at level ``i`` has diameter at
most ``diameter / 2**(L - i)``. Clusters that shrink to one point become
leaves at their own level; clusters still holding several points below
level 1 get one level-0 leaf per point.

Tree distances are in normalized units (minimum pairwise distance = 1) with
the edge between levels ``i`` and ``i - 1`` weighing ``2**(i - 1)``. Two
points whose lowest common ancestor sits at level ``h`` are ``2 * (2**h - 1)``
apart, whatever level their leaves sit at.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import InvalidInputError, check_point_ids, make_rng
from .metric import MetricSpace


@dataclass(frozen=True)
class HstNode:
    id: int
    level: int
    center: int
    parent: int | None
    children: tuple[int, ...]
    leaf_point: int | None
    n_universe: int
    n_demand: int | None


@dataclass(frozen=True)
class DistortionReport:
    mean_ratio: float
    max_ratio: float
    n_pairs: int


@dataclass(frozen=True, eq=False)
class HstTree:
    """Immutable leveled tree over the points of ``space``.

    Per-node data lives in parallel arrays indexed by node id. ``lo``/``hi``
    delimit each node's points inside ``leaf_order`` (a depth-first listing
    of the points), so the points under node ``v`` are
    ``leaf_order[lo[v]:hi[v]]``.
    """

    space: MetricSpace
    L: int
    seed: int
    scale: float
    diameter_norm: float
    level: np.ndarray
    parent: np.ndarray
    center: np.ndarray
    leaf_point: np.ndarray
    n_universe: np.ndarray
    children: tuple
    leaf_of: np.ndarray
    leaf_order: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_demand: np.ndarray | None = None
    root: int = 0

    @property
    def n_nodes(self) -> int:
        return self.level.shape[0]

    @property
    def n_points(self) -> int:
        return self.leaf_of.shape[0]

    def is_leaf(self, v: int) -> bool:
        return self.leaf_point[v] >= 0

    def node(self, v: int) -> HstNode:
        p = int(self.parent[v])
        lp = int(self.leaf_point[v])
        return HstNode(
            id=int(v),
            level=int(self.level[v]),
            center=int(self.center[v]),
            parent=None if p < 0 else p,
            children=tuple(int(c) for c in self.children[v]),
            leaf_point=None if lp < 0 else lp,
            n_universe=int(self.n_universe[v]),
            n_demand=None if self.n_demand is None else int(self.n_demand[v]),
        )

    def points_under(self, v: int) -> np.ndarray:
        return self.leaf_order[self.lo[v]:self.hi[v]]

    def counts(self, field: str = "universe") -> np.ndarray:
        if field == "universe":
            return self.n_universe
        if field == "demand":
            if self.n_demand is None:
                raise InvalidInputError("tree has no demand annotation; call annotate_demand first")
            return self.n_demand
        raise InvalidInputError(f"count field must be 'universe' or 'demand', got {field!r}")

    def ancestors(self, v: int):
        """Yield the strict ancestors of ``v``, nearest first."""
        p = self.parent[v]
        while p >= 0:
            yield int(p)
            p = self.parent[p]

    def is_ancestor(self, a: int, v: int) -> bool:
        return self.lo[a] <= self.lo[v] and self.hi[v] <= self.hi[a] and a != v

    def to_dict(self) -> dict:
        nodes = []
        for v in range(self.n_nodes):
            p = int(self.parent[v])
            lp = int(self.leaf_point[v])
            nodes.append({
                "id": v,
                "level": int(self.level[v]),
                "center": int(self.center[v]),
                "parent": None if p < 0 else p,
                "point": None if lp < 0 else lp,
                "n_universe": int(self.n_universe[v]),
                "n_demand": None if self.n_demand is None else int(self.n_demand[v]),
            })
        return {"L": self.L, "seed": self.seed, "scale": self.scale,
                "diameter_norm": self.diameter_norm, "root": self.root, "nodes": nodes}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def auto_levels(space: MetricSpace) -> int:
    """Depth that makes the normalized diameter at most ``2**L`` (at least 1)."""
    dnorm = space.diameter / space.min_dist if space.diameter > 0 else 0.0
    if dnorm <= 2.0:
        return 1
    # guard against log2 rounding just above an exact power of two
    L = math.ceil(math.log2(dnorm))
    if 2.0 ** (L - 1) >= dnorm:
        L -= 1
    return max(1, L)


def _carve(space: MetricSpace, perm: np.ndarray, radius: float):
    balls = []
    rem = perm
    while rem.size:
        c = rem[0]
        if rem.size == 1:
            balls.append((c, rem))
            break
        inside = space.distances_from(int(c), rem) <= radius
        inside[0] = True
        balls.append((c, rem[inside]))
        rem = rem[~inside]
    return balls


def build_hst(space: MetricSpace, L="auto", seed: int = 0) -> HstTree:
    """Build a randomized 2-HST over ``space``.

    Parameters
    ----------
    space : MetricSpace
    L : int or "auto"
        Number of levels below the root. ``"auto"`` picks the smallest ``L``
        with ``diameter / min_dist <= 2**L``.
    seed : int
        Every cluster draws its visiting order from a stream keyed by
        ``(seed, node id)``, so the tree is a pure function of the inputs.
    """
    if L == "auto" or L is None:
        L = auto_levels(space)
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
        raise InvalidInputError(f"L must be a positive integer or 'auto', got {L!r}")
    L = int(L)
    n = space.n
    if n < 1:
        raise InvalidInputError("space is empty")
    diameter = space.diameter

    level = []
    parent = []
    center = []
    leaf_point = []

    def add(lvl, par, ctr, pt):
        level.append(lvl)
        parent.append(par)
        center.append(int(ctr))
        leaf_point.append(pt)
        return len(level) - 1

    root_center = int(make_rng(seed, "root").integers(n))
    if n == 1:
        add(L, -1, 0, 0)
        frontier = []
    else:
        add(L, -1, root_center, -1)
        frontier = [(0, np.arange(n, dtype=np.int64))]

    for lvl in range(L - 1, 0, -1):
        radius = diameter / 2.0 ** (L - lvl + 1)
        nxt = []
        for nid, idx in frontier:
            perm = idx[make_rng(seed, nid).permutation(idx.size)]
            for c, members in _carve(space, perm, radius):
                if members.size == 1:
                    add(lvl, nid, c, int(c))
                else:
                    child = add(lvl, nid, c, -1)
                    nxt.append((child, members))
        frontier = nxt
        if not frontier:
            break

    for nid, idx in frontier:
        for p in np.sort(idx):
            add(0, nid, p, int(p))

    return tree_from_arrays(space, L, parent, level, leaf_point, center, seed=seed)


def tree_from_arrays(space: MetricSpace, L: int, parent, level, leaf_point, center=None,
                     seed: int = 0) -> HstTree:
    """Assemble an :class:`HstTree` from parent pointers.

    Node 0 must be the root (``parent[0] == -1``) and parents must precede
    their children. Leaves are the nodes with ``leaf_point >= 0``; each point
    of ``space`` must appear exactly once. Universe counts are derived.
    Useful for hand-built trees; :func:`build_hst` goes through here too.
    """
    level = np.asarray(level, dtype=np.int64)
    parent = np.asarray(parent, dtype=np.int64)
    leaf_point = np.asarray(leaf_point, dtype=np.int64)
    m = level.size
    if parent.size != m or leaf_point.size != m or m == 0 or parent[0] != -1:
        raise InvalidInputError("parent/level/leaf_point must be equal-length with node 0 as root")
    if np.any(parent[1:] < 0) or np.any(parent[1:] >= np.arange(1, m)):
        raise InvalidInputError("every non-root parent must be an earlier node")
    n = space.n
    is_leaf = leaf_point >= 0
    if not np.array_equal(np.sort(leaf_point[is_leaf]), np.arange(n)):
        raise InvalidInputError("leaf points must cover every point exactly once")
    kids = [[] for _ in range(m)]
    for v in range(1, m):
        kids[parent[v]].append(v)
    children = tuple(np.asarray(c, dtype=np.int64) for c in kids)
    n_universe = is_leaf.astype(np.int64)
    for v in range(m - 1, 0, -1):
        n_universe[parent[v]] += n_universe[v]
    if center is None:
        center = np.empty(m, dtype=np.int64)
        for v in range(m - 1, -1, -1):
            center[v] = leaf_point[v] if is_leaf[v] else center[children[v][0]]
    center = np.asarray(center, dtype=np.int64)

    lo, hi, leaf_order = _dfs_ranges(children, leaf_point)
    leaf_of = np.empty(n, dtype=np.int64)
    leaf_of[leaf_point[is_leaf]] = np.flatnonzero(is_leaf)

    for arr in (level, parent, center, leaf_point, n_universe, leaf_of, leaf_order, lo, hi):
        arr.setflags(write=False)
    scale = 1.0 / space.min_dist
    return HstTree(space=space, L=int(L), seed=seed, scale=scale,
                   diameter_norm=space.diameter * scale, level=level, parent=parent,
                   center=center, leaf_point=leaf_point, n_universe=n_universe,
                   children=children, leaf_of=leaf_of, leaf_order=leaf_order,
                   lo=lo, hi=hi)


def _dfs_ranges(children, leaf_point):
    m = len(children)
    lo = np.zeros(m, dtype=np.int64)
    hi = np.zeros(m, dtype=np.int64)
    order = []
    stack = [(0, False)]
    while stack:
        v, done = stack.pop()
        if done:
            hi[v] = len(order)
            continue
        lo[v] = len(order)
        if leaf_point[v] >= 0:
            order.append(int(leaf_point[v]))
            hi[v] = len(order)
            continue
        stack.append((v, True))
        for c in children[v][::-1]:
            stack.append((int(c), False))
    return lo, hi, np.asarray(order, dtype=np.int64)


def _leaf(tree: HstTree, u) -> int:
    if isinstance(u, (bool, np.bool_)) or not isinstance(u, (int, np.integer)):
        raise InvalidInputError(f"point id must be an integer, got {u!r}")
    if not 0 <= u < tree.n_points:
        raise InvalidInputError(f"point {u} is not a leaf of this tree")
    return int(tree.leaf_of[u])


def lca(tree: HstTree, a: int, b: int) -> int:
    """Lowest common ancestor of nodes ``a`` and ``b``."""
    seen = {a}
    seen.update(tree.ancestors(a))
    x = b
    while x not in seen:
        x = int(tree.parent[x])
    return x


def tree_distance(tree: HstTree, u: int, v: int) -> float:
    """Normalized tree distance between points ``u`` and ``v``."""
    a, b = _leaf(tree, u), _leaf(tree, v)
    if a == b:
        return 0.0
    h = int(tree.level[lca(tree, a, b)])
    return 2.0 * (2.0 ** h - 1.0)


def tree_distance_matrix(tree: HstTree) -> np.ndarray:
    """All-pairs normalized tree distances (O(n^2) memory)."""
    n = tree.n_points
    out = np.zeros((n, n))
    # top-down overwrite: deeper common ancestors replace shallower ones
    order = np.argsort(-tree.level, kind="stable")
    for v in order:
        if tree.leaf_point[v] >= 0:
            continue
        pts = tree.points_under(v)
        out[np.ix_(pts, pts)] = 2.0 * (2.0 ** int(tree.level[v]) - 1.0)
    np.fill_diagonal(out, 0.0)
    return out


def edge_weight(tree: HstTree, v: int) -> float:
    """Length of the edge from ``v`` up to its parent.

    A leaf hanging at level ``i`` stands for a chain of single-child nodes
    down to level 0, so its edge also carries the collapsed chain.
    """
    p = tree.parent[v]
    if p < 0:
        return 0.0
    top = 2.0 ** int(tree.level[p])
    bottom = 1.0 if tree.leaf_point[v] >= 0 else 2.0 ** int(tree.level[v])
    return top - bottom


def annotate_demand(tree: HstTree, demand) -> HstTree:
    """Return a copy of ``tree`` with per-node demand counts filled in."""
    ids = check_point_ids(demand, tree.n_points, "demand")
    if ids.size == 0:
        raise InvalidInputError("demand set is empty")
    mark = np.zeros(tree.n_points, dtype=np.int64)
    mark[ids] = 1
    prefix = np.concatenate([[0], np.cumsum(mark[tree.leaf_order])])
    n_demand = prefix[tree.hi] - prefix[tree.lo]
    n_demand.setflags(write=False)
    return replace(tree, n_demand=n_demand)


def measure_distortion(tree: HstTree, sample_pairs: int = 1000, seed: int = 0) -> DistortionReport:
    """Ratio statistics of tree distance over normalized metric distance.

    All distinct pairs are used when ``sample_pairs`` covers them; otherwise
    pairs are drawn uniformly. Pairs at metric distance zero are skipped.
    """
    n = tree.n_points
    if n < 2:
        raise InvalidInputError("distortion needs at least two points")
    total = n * (n - 1) // 2
    if sample_pairs >= total:
        us, vs = np.triu_indices(n, k=1)
    else:
        rng = make_rng(seed, "distortion")
        us = rng.integers(0, n, size=sample_pairs)
        vs = (us + rng.integers(1, n, size=sample_pairs)) % n
    ratios = []
    for u, v in zip(us.tolist(), vs.tolist()):
        d = tree.space.distance(u, v) * tree.scale
        if d <= 0:
            continue
        ratios.append(tree_distance(tree, u, v) / d)
    if not ratios:
        return DistortionReport(float("nan"), float("nan"), 0)
    r = np.asarray(ratios)
    return DistortionReport(float(r.mean()), float(r.max()), int(r.size))


def validate_tree(tree: HstTree, rtol: float = 1e-9) -> dict:
    """Exhaustive structural checks; returns ``{check_name: [violations]}``.

    Checks leaf completeness, count consistency (universe and, when present,
    demand) and the per-level diameter bound. Cost is quadratic in the
    subtree sizes, intended for trees of a few hundred points.
    """
    problems = {"leaf-completeness": [], "count-consistency": [], "diameter-property": []}
    n = tree.n_points
    leaves = tree.leaf_point[tree.leaf_point >= 0]
    if leaves.size != n or not np.array_equal(np.sort(leaves), np.arange(n)):
        problems["leaf-completeness"].append("leaf points are not a permutation of the space")
    if int(tree.n_universe[tree.root]) != n:
        problems["count-consistency"].append(f"root n_universe={int(tree.n_universe[tree.root])} != {n}")
    for v in range(tree.n_nodes):
        ch = tree.children[v]
        if tree.leaf_point[v] >= 0:
            if ch.size or tree.n_universe[v] != 1:
                problems["count-consistency"].append(f"leaf {v} has children or n_universe != 1")
            continue
        if ch.size == 0:
            problems["leaf-completeness"].append(f"internal node {v} has no children")
            continue
        if int(tree.n_universe[ch].sum()) != int(tree.n_universe[v]):
            problems["count-consistency"].append(f"node {v}: n_universe != sum over children")
        if tree.n_demand is not None and int(tree.n_demand[ch].sum()) != int(tree.n_demand[v]):
            problems["count-consistency"].append(f"node {v}: n_demand != sum over children")
        if np.any(tree.level[ch] != tree.level[v] - 1):
            problems["count-consistency"].append(f"node {v}: child level is not parent level - 1")
        pts = tree.points_under(v)
        bound = tree.space.diameter / 2.0 ** (tree.L - int(tree.level[v]))
        observed = float(tree.space.pairwise(pts, pts).max())
        if observed > bound * (1 + rtol):
            problems["diameter-property"].append(
                f"node {v} (level {int(tree.level[v])}): diameter {observed:.6g} > bound {bound:.6g}")
    return problems
