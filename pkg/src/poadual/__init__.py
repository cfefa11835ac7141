"""Exact price-of-anarchy bounds from configuration LPs and their duals.

Games and auctions are enumerated at desk scale with rational arithmetic; dual
certificates are checked constraint by constraint and turned into bounds by
weak duality.
"""

__version__ = "0.1.0"

from .caps import DEFAULT_CAPS, Caps
from .certificates import (
    DualCertificate,
    atomic_duals,
    augmentation_certificate,
    certified_poa_bound,
    nonatomic_duals,
    score,
    smooth_duals,
    splittable_duals,
)
from .configlp import (
    BuiltProgram,
    augmented_lp,
    nonatomic_lp,
    profile_lp,
    resource_lp,
    splittable_lp,
)
from .congestion import AtomicGame, NonAtomicGame, SplittableGame
from .costs import LINEAR, QUADRATIC, PiecewiseLinear, Polynomial, constant
from .equilibria import (
    JointDistribution,
    check_cce,
    check_wardrop,
    empirical_poa,
    marginal_equilibria,
    pure_nash_all,
    wardrop_equilibrium,
    worst_cce,
)
from .errors import PoaError
from .lp import LinearProgram, LPBuilder, dual_of, feasibility_residuals, solve
from .smoothness import (
    SmoothnessCertificate,
    check_dual_smooth,
    check_game_smooth,
    check_resource_smooth,
    pigou_bound,
    robust_poa_search,
)
