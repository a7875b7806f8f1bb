"""Finite metric spaces over integer point ids.

Two backends are supported: rows of a real matrix under the L1 or L2 norm,
and a connected weighted graph under the shortest-path distance. Graph spaces
precompute the full n x n distance table; vector spaces compute distances on
demand from the rows.
"""

from __future__ import annotations

import csv
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ._validation import DisconnectedGraphError, InvalidInputError, check_point_ids

NORMS = ("l1", "l2")
_CDIST_NAME = {"l1": "cityblock", "l2": "euclidean"}


class MetricSpace:
    """A finite metric space on point ids ``0 .. n-1``.

    Use :func:`build_vector_metric` or :func:`build_graph_metric` rather than
    calling the constructor directly. Instances are immutable.
    """

    def __init__(self, *, points: np.ndarray | None = None, norm: str | None = None,
                 table: np.ndarray | None = None):
        if (points is None) == (table is None):
            raise InvalidInputError("exactly one of points or table must be given")
        if points is not None:
            self._points = np.ascontiguousarray(points, dtype=float)
            self._points.setflags(write=False)
            self._table = None
            self.norm = norm
            self.backend = "vector"
            self.n = self._points.shape[0]
        else:
            self._points = None
            self._table = np.ascontiguousarray(table, dtype=float)
            self._table.setflags(write=False)
            self.norm = None
            self.backend = "graph"
            self.n = self._table.shape[0]

    def __repr__(self):
        extra = f", norm={self.norm!r}" if self.backend == "vector" else ""
        return f"MetricSpace(backend={self.backend!r}, n={self.n}{extra})"

    def __len__(self):
        return self.n

    @property
    def points(self) -> np.ndarray | None:
        return self._points

    @property
    def table(self) -> np.ndarray | None:
        return self._table

    def _check_id(self, u) -> int:
        if isinstance(u, (bool, np.bool_)) or not isinstance(u, (int, np.integer)):
            raise InvalidInputError(f"point id must be an integer, got {u!r}")
        if not 0 <= u < self.n:
            raise InvalidInputError(f"point id {u} outside [0, {self.n})")
        return int(u)

    def distance(self, u, v) -> float:
        u, v = self._check_id(u), self._check_id(v)
        if u == v:
            return 0.0
        if self._table is not None:
            return float(self._table[u, v])
        diff = self._points[u] - self._points[v]
        if self.norm == "l1":
            return float(np.abs(diff).sum())
        return float(np.sqrt(diff @ diff))

    def distances_from(self, u: int, cols=None) -> np.ndarray:
        """Distances from point ``u`` to ``cols`` (all points when None)."""
        if self._table is not None:
            row = self._table[u]
            return row.copy() if cols is None else row[cols]
        pts = self._points if cols is None else self._points[cols]
        diff = pts - self._points[u]
        if self.norm == "l1":
            return np.abs(diff).sum(axis=1)
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def pairwise(self, rows=None, cols=None) -> np.ndarray:
        """Distance block between ``rows`` and ``cols`` (all points when None)."""
        if self._table is not None:
            t = self._table
            if rows is not None:
                t = t[np.asarray(rows)]
            if cols is not None:
                t = t[:, np.asarray(cols)]
            return np.array(t, dtype=float)
        a = self._points if rows is None else self._points[np.asarray(rows)]
        b = self._points if cols is None else self._points[np.asarray(cols)]
        return cdist(a, b, _CDIST_NAME[self.norm])

    @cached_property
    def diameter(self) -> float:
        """Largest pairwise distance (0.0 when every point coincides)."""
        if self.n < 2:
            return 0.0
        if self._table is not None:
            return float(self._table.max())
        return _vector_diameter(self._points, self.norm)

    @cached_property
    def min_dist(self) -> float:
        """Smallest positive pairwise distance (1.0 by convention if none exists)."""
        if self._table is not None:
            pos = self._table[self._table > 0]
            return float(pos.min()) if pos.size else 1.0
        uniq = np.unique(self._points, axis=0)
        if uniq.shape[0] < 2:
            return 1.0
        p = 1 if self.norm == "l1" else 2
        dist, _ = cKDTree(uniq).query(uniq, k=2, p=p)
        return float(dist[:, 1].min())

    def subspace(self, ids) -> "MetricSpace":
        """Metric restricted to ``ids`` (renumbered 0 .. len(ids)-1)."""
        ids = check_point_ids(ids, self.n, "ids")
        if self._table is not None:
            return MetricSpace(table=self._table[np.ix_(ids, ids)])
        return MetricSpace(points=self._points[ids], norm=self.norm)


def _vector_diameter(points: np.ndarray, norm: str, block: int = 2048) -> float:
    # Exact: only points whose centroid-distance bound can beat the current best
    # pair survive to the brute-force stage.
    metric = _CDIST_NAME[norm]
    c = points.mean(axis=0, keepdims=True)
    to_c = cdist(points, c, metric).ravel()
    radius = to_c.max()
    far = int(np.argmax(to_c))
    best = 0.0
    for _ in range(3):
        row = cdist(points[far:far + 1], points, metric).ravel()
        nxt = int(np.argmax(row))
        if row[nxt] <= best:
            break
        best = float(row[nxt])
        far = nxt
    cand = points[to_c + radius > best]
    for start in range(0, cand.shape[0], block):
        chunk = cdist(cand[start:start + block], cand, metric)
        best = max(best, float(chunk.max()))
    return best


def build_vector_metric(points, norm: str = "l2") -> MetricSpace:
    """Metric space on the rows of ``points`` under the L1 or L2 norm.

    Diameter and minimum distance are computed exactly on first access.
    """
    norm = str(norm).lower()
    if norm not in NORMS:
        raise InvalidInputError(f"norm must be one of {NORMS}, got {norm!r}")
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError("points must be a non-empty n x d matrix")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("points contain non-finite values")
    return MetricSpace(points=arr, norm=norm)


def _edge_arrays(edges, n: int):
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=float)
    if arr.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError("edges must be a sequence of (u, v, w) triples")
    u = arr[:, 0]
    v = arr[:, 1]
    w = arr[:, 2]
    if np.any(u != np.floor(u)) or np.any(v != np.floor(v)):
        raise InvalidInputError("edge endpoints must be integers")
    u = u.astype(np.int64)
    v = v.astype(np.int64)
    bad = (u < 0) | (u >= n) | (v < 0) | (v >= n)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InvalidInputError(f"edge {i} ({u[i]}, {v[i]}) has an endpoint outside [0, {n})")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        i = int(np.flatnonzero(~(w > 0) | ~np.isfinite(w))[0])
        raise InvalidInputError(f"edge {i} ({u[i]}, {v[i]}) has nonpositive weight {w[i]}")
    keep = u != v
    return u[keep], v[keep], w[keep]


def build_graph_metric(edges, n: int) -> MetricSpace:
    """Shortest-path metric of an undirected weighted graph on ``n`` nodes.

    Parallel edges keep their minimum weight and self-loops are dropped.
    The all-pairs table is filled by running Dijkstra from every node.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")
    u, v, w = _edge_arrays(edges, n)
    # undirected, and min over parallel edges (coo would sum duplicates)
    a = np.minimum(u, v)
    b = np.maximum(u, v)
    order = np.lexsort((w, b, a))
    a, b, w = a[order], b[order], w[order]
    first = np.ones(a.size, dtype=bool)
    first[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
    a, b, w = a[first], b[first], w[first]
    graph = coo_matrix((w, (a, b)), shape=(n, n)).tocsr()
    if n > 1:
        n_comp, labels = connected_components(graph, directed=False)
        if n_comp > 1:
            other = int(np.flatnonzero(labels != labels[0])[0])
            raise DisconnectedGraphError(0, other)
    table = shortest_path(graph, method="D", directed=False)
    np.fill_diagonal(table, 0.0)
    table = np.minimum(table, table.T)
    return MetricSpace(table=table)


def read_edge_list(path) -> tuple[list[tuple[int, int, float]], int]:
    """Parse an edge-list file: header ``n m`` then ``m`` lines of ``u v w``.

    Blank lines and lines starting with ``#`` are ignored. Errors carry the
    offending line number.
    """
    path = Path(path)
    header = None
    edges = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if header is None:
                if len(parts) != 2:
                    raise InvalidInputError(f"{path}:{lineno}: header must be 'n m'")
                try:
                    header = (int(parts[0]), int(parts[1]))
                except ValueError:
                    raise InvalidInputError(f"{path}:{lineno}: header must be two integers") from None
                continue
            if len(parts) != 3:
                raise InvalidInputError(f"{path}:{lineno}: expected 'u v w', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: cannot parse {line!r}") from None
    if header is None:
        raise InvalidInputError(f"{path}: empty edge-list file")
    n, m = header
    if len(edges) != m:
        raise InvalidInputError(f"{path}: header declares {m} edges, found {len(edges)}")
    return edges, n


def write_edge_list(path, edges, n: int) -> None:
    edges = list(edges)
    with Path(path).open("w") as fh:
        fh.write(f"{n} {len(edges)}\n")
        for u, v, w in edges:
            fh.write(f"{int(u)} {int(v)} {float(w)!r}\n")


def read_vector_csv(path) -> np.ndarray:
    """Parse a headerless CSV of equal-length numeric rows."""
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: non-numeric field in {rec!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise InvalidInputError(
                    f"{path}:{lineno}: row has {len(vals)} fields, expected {width}")
            rows.append(vals)
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def load_space(path, norm: str = "l2", fmt: str = "auto") -> MetricSpace:
    """Load a metric space from a vector CSV or an edge-list file.

    With ``fmt="auto"`` a ``.csv`` suffix selects the vector reader and
    anything else the edge-list reader.
    """
    path = Path(path)
    if fmt == "auto":
        fmt = "vector" if path.suffix.lower() == ".csv" else "graph"
    if fmt == "vector":
        return build_vector_metric(read_vector_csv(path), norm)
    if fmt == "graph":
        edges, n = read_edge_list(path)
        return build_graph_metric(edges, n)
    raise InvalidInputError(f"unknown data format {fmt!r}")
