"""Costly-information combinatorial selection: amortized surrogates, commitments, index policies."""

from .amort import Amortization, Decomposer, Decomposition, decompose, mdp_curve, mdp_surrogate, water_fill
from .cims import (
    Action,
    Commitment,
    Node,
    action,
    apply_commitment,
    chain_of_dist,
    check_mdp,
    count_commitments,
    enumerate_commitments,
    node,
    terminal,
    validate_mdp,
)
from .curve import (
    Curve,
    StochasticMap,
    combine,
    curve_leq,
    curve_of,
    diag_scale,
    dist_of,
    dominates_1st,
    dominates_2nd,
    local_approx_factor,
    sdom_map,
    weighted_sum,
)
from .dist import Dist, expected_clamp, expected_shortfall, make_dist, mixture, point, quantile, solve_index
from .errors import CapExceeded, CicsError, DomainError, ParseError
from .selection import (
    Instance,
    Matroid,
    brute_force_opt,
    commitment_gap,
    index_policy_value,
    matroid_oracle,
    semilocal_compose,
    surrogate_bound,
)

__version__ = "0.1.0"
