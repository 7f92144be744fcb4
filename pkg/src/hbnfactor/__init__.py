"""Hybrid Bayesian networks with binary and stacking factorization."""

from .expr import ParseError, parse, substitute, unparse
from .model import (ContinuousNode, DiscreteNode, Expression, HybridBn, Partitioned, Table,
                    continuous, continuous_parent_count, cpd_size, discrete, partitioned,
                    validate)
from .factorize import (MixtureSpec, RewriteReport, alpha_weights, binary_factorize, sf_bf,
                        stack_mixture, stacking_factorize)
from .discretize import (DDConfig, Partition, compile, dynamic_discretize, ree,
                         uniform_partition)
from .inference import (brute_force_joint, build_jt, marginal, metrics, moralize, propagate,
                        triangulate)

__version__ = "0.1.0"

__all__ = [
    "ParseError", "parse", "substitute", "unparse",
    "ContinuousNode", "DiscreteNode", "Expression", "HybridBn", "Partitioned", "Table",
    "continuous", "continuous_parent_count", "cpd_size", "discrete", "partitioned", "validate",
    "MixtureSpec", "RewriteReport", "alpha_weights", "binary_factorize", "sf_bf",
    "stack_mixture", "stacking_factorize",
    "DDConfig", "Partition", "compile", "dynamic_discretize", "ree", "uniform_partition",
    "brute_force_joint", "build_jt", "marginal", "metrics", "moralize", "propagate",
    "triangulate",
]
