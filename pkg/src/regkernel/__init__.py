"""Tools for kernel structure of shifted sparse d-regular 0/1 matrices.

Submodules:

- graph_core: exact matrix representation, switching, shifted application
- sampler: uniform sampling (rejection, switching chain), enumeration,
  multigraph and surrogate draws
- taxonomy: scale parameters, steepness classes, almost-constant splitting
- ell_decomp: lattice approximation and level-set decomposition of vectors
- estimators: part-sum projections, weight/entropy estimators, standardness
- graph_stats: expansion events, row-hit counts, deflated operator norm
- spectral: smallest singular value probes, eigenpair census
- decomposition: gradual-vector cover and dichotomy certificates
- harness: reproducible experiment driver behind the CLI
"""

__version__ = "0.1.0"

from . import (
    decomposition,
    ell_decomp,
    estimators,
    graph_core,
    graph_stats,
    harness,
    sampler,
    spectral,
    taxonomy,
)

__all__ = [
    "decomposition",
    "ell_decomp",
    "estimators",
    "graph_core",
    "graph_stats",
    "harness",
    "sampler",
    "spectral",
    "taxonomy",
]
