"""scikit-learn style estimators wrapping the seeding and local-search routines."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from ._validation import InvalidInputError
from .local_search import check_objective, local_search
from .metric import _CDIST_NAME, MetricSpace, build_vector_metric
from .privacy import dp_local_search
from .seeding import hst_init, kmedianpp_init, random_init

_INITS = ("hst", "kmedianpp", "random")
_METRICS = ("l2", "l1", "precomputed")


def _seed_from(random_state) -> int:
    return int(check_random_state(random_state).randint(np.iinfo(np.int32).max))


def _space_from(X, metric: str) -> MetricSpace:
    if metric not in _METRICS:
        raise InvalidInputError(f"metric must be one of {_METRICS}, got {metric!r}")
    X = check_array(X, dtype=float)
    if metric != "precomputed":
        return build_vector_metric(X, metric)
    if X.shape[0] != X.shape[1]:
        raise InvalidInputError(f"precomputed distances must be square, got shape {X.shape}")
    if np.any(X < 0) or np.any(np.diag(X) != 0) or not np.allclose(X, X.T):
        raise InvalidInputError("precomputed distances must be symmetric, non-negative, zero on the diagonal")
    return MetricSpace(table=X)


class _CenterMixin(ClusterMixin, TransformerMixin):
    def _center_distances(self, X) -> np.ndarray:
        check_is_fitted(self, "cluster_centers_indices_")
        X = check_array(X, dtype=float)
        if self.metric == "precomputed":
            if X.shape[1] != self.n_features_in_:
                raise InvalidInputError(
                    f"expected distances to the {self.n_features_in_} training points, got {X.shape[1]} columns")
            return X[:, self.cluster_centers_indices_]
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return cdist(X, self.cluster_centers_, _CDIST_NAME[self.metric])

    def transform(self, X):
        """Distance from each row of ``X`` to each center."""
        return self._center_distances(X)

    def predict(self, X):
        """Index of the nearest center for each row of ``X``."""
        return self._center_distances(X).argmin(axis=1)

    def _set_fitted(self, space: MetricSpace, X, centers, demand, objective):
        X = np.asarray(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        self.cluster_centers_indices_ = np.asarray(centers, dtype=np.int64)
        self.cluster_centers_ = X[self.cluster_centers_indices_]
        d = space.pairwise(self.cluster_centers_indices_, None)
        self.labels_ = d.argmin(axis=0)
        near = d[:, demand].min(axis=0)
        self.inertia_ = float((near ** 2 if objective == "means" else near).sum())


class KMedian(_CenterMixin, BaseEstimator):
    """k-median (or k-means) clustering by single-swap local search.

    Parameters
    ----------
    n_clusters : int, default=8
        Number of centers. Centers are always input points.
    init : {"hst", "kmedianpp", "random"}, default="hst"
        Seeding routine run before local search.
    metric : {"l2", "l1", "precomputed"}, default="l2"
        With ``"precomputed"``, ``X`` is an ``n x n`` distance matrix.
    L : int or "auto", default="auto"
        Depth of the tree used by ``init="hst"``.
    alpha : float, default=1e-3
        A swap is accepted only if it lowers the cost by a factor ``1 - alpha/k``.
    max_iter : int, default=20
        Maximum number of swaps.
    objective : {"median", "means"}, default="median"
    random_state : int, RandomState instance or None, default=None

    Attributes
    ----------
    cluster_centers_indices_ : ndarray of shape (n_clusters,)
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
        Rows of ``X`` at the center indices (distance rows when precomputed).
    labels_ : ndarray of shape (n_samples,)
    inertia_ : float
        Objective value on the demand set.
    cost_trace_ : CostTrace
    """

    def __init__(self, n_clusters=8, *, init="hst", metric="l2", L="auto", alpha=1e-3,
                 max_iter=20, objective="median", random_state=None):
        self.n_clusters = n_clusters
        self.init = init
        self.metric = metric
        self.L = L
        self.alpha = alpha
        self.max_iter = max_iter
        self.objective = objective
        self.random_state = random_state

    def fit(self, X, y=None, demand=None):
        """Fit on ``X``. ``demand`` restricts the cost to a subset of rows."""
        check_objective(self.objective)
        if self.init not in _INITS:
            raise InvalidInputError(f"init must be one of {_INITS}, got {self.init!r}")
        space = _space_from(X, self.metric)
        seed = _seed_from(self.random_state)
        if self.init == "hst":
            start = hst_init(space, self.n_clusters, self.L, seed, demand=demand)
        elif self.init == "kmedianpp":
            start = kmedianpp_init(space, self.n_clusters, seed, squared=self.objective == "means")
        else:
            start = random_init(space, self.n_clusters, seed)
        self.cost_trace_ = local_search(space, demand, start, self.alpha, self.max_iter, self.objective)
        dem = np.arange(space.n) if demand is None else np.asarray(demand, dtype=np.int64)
        self._set_fitted(space, X, self.cost_trace_.final.centers, dem, self.objective)
        self.n_iter_ = self.cost_trace_.iterations
        return self


class DPKMedian(_CenterMixin, BaseEstimator):
    """Differentially private k-median over a public point set.

    The rows of ``X`` are the public universe; ``demand`` (row indices) is
    the private data. ``epsilon`` covers seeding and search together.

    Parameters
    ----------
    n_clusters : int, default=8
    epsilon : float, default=1.0
    n_iter : int, default=20
        Number of private swap steps.
    init : {"hst", "kmedianpp", "random"}, default="hst"
        Only ``"hst"`` looks at the demand set (with half the budget).
    metric : {"l2", "l1", "precomputed"}, default="l2"
    L : int, default=8
    objective : {"median", "means"}, default="median"
    random_state : int, RandomState instance or None, default=None

    Attributes
    ----------
    cluster_centers_indices_, cluster_centers_, labels_, inertia_
        As in :class:`KMedian`.
    cost_trace_ : CostTrace
    privacy_ledger_ : list of dict
    """

    def __init__(self, n_clusters=8, *, epsilon=1.0, n_iter=20, init="hst", metric="l2", L=8,
                 objective="median", random_state=None):
        self.n_clusters = n_clusters
        self.epsilon = epsilon
        self.n_iter = n_iter
        self.init = init
        self.metric = metric
        self.L = L
        self.objective = objective
        self.random_state = random_state

    def fit(self, X, y=None, demand=None):
        if self.init not in _INITS:
            raise InvalidInputError(f"init must be one of {_INITS}, got {self.init!r}")
        space = _space_from(X, self.metric)
        dem = np.arange(space.n) if demand is None else np.asarray(demand, dtype=np.int64)
        res = dp_local_search(space, dem, self.n_clusters, self.epsilon, self.n_iter,
                              _seed_from(self.random_state), init=self.init, L=self.L,
                              objective=self.objective)
        self.cost_trace_ = res.trace
        self.privacy_ledger_ = res.budget.to_list()
        self._set_fitted(space, X, res.centers.centers, dem, self.objective)
        return self
