"""Availability, coverage, and rate analysis of K-tier energy-harvesting
cellular networks, with Monte Carlo cross-validation of every closed form.
"""

from .analytic import (
    FixedPointResult,
    NonConvergenceError,
    check_feasibility,
    energy_outage_bound,
    energy_utilization,
    equivalence_check,
    frac_moment,
    g,
    mean_service_area,
    solve_availability,
)
from .coverage import (
    RateQuery,
    SeriesTruncationError,
    coverage_prob,
    hyper_f,
    rate_ccdf,
    tier_association_prob,
)
from .markov import (
    BirthDeathSpec,
    PolicySpec,
    generator,
    mean_off_time,
    mean_on_time,
    neg_b_inverse,
    neg_b_inverse_entry,
    policy_availability,
    simulate_on_off,
    stationary,
    verify_s1_optimal,
)
from .model import (
    NO_SHADOWING,
    NetworkScenario,
    ScenarioError,
    ShadowingSpec,
    SimEstimate,
    TierParams,
    validate,
)
from .region import RegionBoundary, boundary, contains, grid_coverage, sweep_boundary
from .simulate import (
    SimConfig,
    associate,
    association_mc,
    coverage_mc,
    rate_mc,
    sample_network,
    service_area_mc,
    suggest_window_side,
)

__version__ = "0.1.0"

__all__ = [
    "BirthDeathSpec",
    "FixedPointResult",
    "NO_SHADOWING",
    "NetworkScenario",
    "NonConvergenceError",
    "PolicySpec",
    "RateQuery",
    "RegionBoundary",
    "ScenarioError",
    "SeriesTruncationError",
    "ShadowingSpec",
    "SimConfig",
    "SimEstimate",
    "TierParams",
    "associate",
    "association_mc",
    "boundary",
    "check_feasibility",
    "contains",
    "coverage_mc",
    "coverage_prob",
    "energy_outage_bound",
    "energy_utilization",
    "equivalence_check",
    "frac_moment",
    "g",
    "generator",
    "grid_coverage",
    "hyper_f",
    "mean_off_time",
    "mean_on_time",
    "mean_service_area",
    "neg_b_inverse",
    "neg_b_inverse_entry",
    "policy_availability",
    "rate_ccdf",
    "rate_mc",
    "sample_network",
    "service_area_mc",
    "simulate_on_off",
    "solve_availability",
    "stationary",
    "suggest_window_side",
    "sweep_boundary",
    "tier_association_prob",
    "validate",
    "verify_s1_optimal",
]
