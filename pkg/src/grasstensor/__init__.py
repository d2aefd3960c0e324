"""Optimization of Rayleigh quotients of Kronecker-structured operators over
products of Grassmann manifolds.

The main entry points are :func:`best_rank_approx`, :func:`entanglement_measure`,
:func:`cluster_subspaces` and :func:`combinatorial_select`; the underlying
solvers are :func:`solve`, :func:`newton_like`, :func:`rcg` and :func:`hooi`.
"""

from .applications import (
    ClusterProblem,
    SelectionProblem,
    best_rank_approx,
    cluster_subspaces,
    combinatorial_select,
    entanglement_measure,
)
from .grassmann import GrassPoint, ProductPoint, random_product, standard_product
from .objective import Dense, Diagonal, KroneckerFactors, RankOne, SumKronPowers
from .rayleigh import gradient, hessian_reduced, rho
from .solvers import SolverConfig, SolveResult, hooi, newton_like, rcg, solve
from .tensor import hosvd_truncate, mode_multiply, unfold, fold

__all__ = [
    "ClusterProblem", "SelectionProblem", "best_rank_approx", "cluster_subspaces",
    "combinatorial_select", "entanglement_measure", "GrassPoint", "ProductPoint",
    "random_product", "standard_product", "Dense", "Diagonal", "KroneckerFactors",
    "RankOne", "SumKronPowers", "gradient", "hessian_reduced", "rho", "SolverConfig",
    "SolveResult", "hooi", "newton_like", "rcg", "solve", "hosvd_truncate",
    "mode_multiply", "unfold", "fold",
]
