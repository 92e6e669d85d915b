"""Online mirror descent over structured loss spaces.

Decision points live on the probability simplex; loss vectors live in a
structured subset of the cube (sparse, spherical, noisy, low-rank, or a
Minkowski sum of those). Each structure gets a regularizer with a certified
(D, alpha, G) triple, and the OMD loop turns the certificate into a regret
bound of D * G * sqrt(2 T / alpha).
"""

from . import atomic_norms, core, kernels, loss_spaces, lowrank_geometry, omd, regularizers
from .core import (
    LossSequence,
    LossVector,
    RegretReport,
    SimplexPoint,
    best_expert,
    regret_of,
)
from .loss_spaces import (
    Additive,
    LowRank,
    Noisy,
    Sparse,
    Spherical,
    Standard,
    lower_bound_value,
    member,
    sample,
    theoretical_bound,
)
from .omd import OmdState, SolverError, hedge, optimal_rate
from .regularizers import (
    Certificate,
    Composite,
    EllipsoidalQuadratic,
    LowRankQuadratic,
    NegEntropy,
    ScaledEuclidean,
    SquaredQNorm,
    compose,
    make_qnorm_for_sparsity,
)
from . import harness

__version__ = "0.1.0"

__all__ = [
    "LossSequence",
    "LossVector",
    "RegretReport",
    "SimplexPoint",
    "best_expert",
    "regret_of",
    "Additive",
    "LowRank",
    "Noisy",
    "Sparse",
    "Spherical",
    "Standard",
    "lower_bound_value",
    "member",
    "sample",
    "theoretical_bound",
    "OmdState",
    "SolverError",
    "hedge",
    "optimal_rate",
    "Certificate",
    "Composite",
    "EllipsoidalQuadratic",
    "LowRankQuadratic",
    "NegEntropy",
    "ScaledEuclidean",
    "SquaredQNorm",
    "compose",
    "make_qnorm_for_sparsity",
    "__version__",
]
