"""Simulation and verification laboratory for critical Galton-Watson metric
trees: exact tree reductions (dynamical pruning, leaf erasure, Bernoulli leaf
coloring), closed-form height/length/size laws, and the generating-function
and Monte Carlo experiments that demonstrate the invariance and attractor
properties of the one-parameter family Q(z) = z + q(1-z)^(1/q).
"""

from . import analytics, experiments, gof, newick, offspring, pruning, sampler, trees
from .trees import CombinatorialTree, MetricTree, TreePoint

__version__ = "0.1.0"

__all__ = [
    "analytics",
    "experiments",
    "gof",
    "newick",
    "offspring",
    "pruning",
    "sampler",
    "trees",
    "CombinatorialTree",
    "MetricTree",
    "TreePoint",
    "__version__",
]
