"""k-median clustering seeded from a hierarchically well-separated tree, with a
differentially private variant and an experiment harness."""

__version__ = "0.1.0"

from ._validation import DisconnectedGraphError, InvalidInputError
from .hst import HstTree, build_hst, measure_distortion, tree_distance, validate_tree
from .local_search import CostTrace, SwapEvaluator, cost, local_search
from .metric import MetricSpace, build_graph_metric, build_vector_metric, load_space
from .privacy import (PrivacyBudget, PrivacyBudgetExceeded, dp_hst_init, dp_local_search,
                      exponential_mechanism, laplace_noise)
from .seeding import CenterSet, find_leaf, hst_init, kmedianpp_init, random_init, subtree_search
from .estimator import DPKMedian, KMedian

__all__ = [
    "CenterSet", "CostTrace", "DPKMedian", "DisconnectedGraphError", "HstTree",
    "InvalidInputError", "KMedian", "MetricSpace", "PrivacyBudget", "PrivacyBudgetExceeded",
    "SwapEvaluator", "build_graph_metric", "build_hst", "build_vector_metric", "cost",
    "dp_hst_init", "dp_local_search", "exponential_mechanism", "find_leaf", "hst_init",
    "kmedianpp_init", "laplace_noise", "load_space", "local_search", "measure_distortion",
    "random_init", "subtree_search", "tree_distance", "validate_tree",
]
