"""Closed-form availability analysis for K-tier harvesting networks.

Ties together the geometric side (mean service areas, energy utilization
rates) and the temporal side (per-BS birth-death chains) into the coupled
fixed-point system for the availability vector rho.  The map rho -> g(rho)
is element-wise increasing and concave, so iterating from the all-ones
vector walks monotonically down onto the unique positive fixed point
whenever the energy-conservation condition gamma > 1 holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import markov
from .coverage import coverage_prob
from .model import (
    NetworkScenario,
    ScenarioError,
    ShadowingSpec,
    check_availability_vector,
    validate,
)

# |s - 1| below this switches g to its continuous-limit expansion; the naive
# form is 0/0 at s = 1.
_S_DEGENERATE = 1e-8


class NonConvergenceError(RuntimeError):
    """Fixed-point iteration ran out of iterations; carries the last state."""

    def __init__(self, rho: np.ndarray, residual: float, iterations: int):
        self.rho = rho
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"no fixed point within {iterations} iterations "
            f"(residual {residual:.3e})")


@dataclass(frozen=True)
class FixedPointResult:
    """Availability fixed point plus solver diagnostics."""

    rho: np.ndarray
    iterations: int
    residual: float
    feasible: bool


def frac_moment(shadowing: ShadowingSpec, alpha: float) -> float:
    """E[X^(2/alpha)] of lognormal shadowing with dB-scale mean and std."""
    return shadowing.frac_moment(alpha)


def _weighted_on_density(scenario: NetworkScenario, rho: np.ndarray) -> float:
    return float(np.sum(rho * scenario.densities() * scenario.tier_weights()))


def mean_service_area(scenario: NetworkScenario, rho, k: int) -> float:
    """Mean service-region area of an ON tier-k BS.

    w_k / sum_j rho_j lambda_j w_j with w the shadowing-power weights; the
    areas weighted by rho_k lambda_k sum to one over tiers.
    """
    rho = check_availability_vector(rho, scenario.k_tiers)
    denom = _weighted_on_density(scenario, rho)
    if denom <= 0.0:
        raise ScenarioError("no BS available: weighted ON density is zero")
    return float(scenario.tier_weights()[k] / denom)


def energy_utilization(scenario: NetworkScenario, rho, k: int) -> float:
    """nu_k: mean energy units consumed per second by an ON tier-k BS."""
    pc = coverage_prob(scenario)
    return pc * scenario.user_density * mean_service_area(scenario, rho, k)


def load_ratio(scenario: NetworkScenario, rho, k: int) -> float:
    """s_k = mu_k / nu_k(rho), the birth-death ratio of tier k at load rho."""
    rho = check_availability_vector(rho, scenario.k_tiers)
    w = scenario.tier_weights()
    pc = coverage_prob(scenario)
    num = scenario.tiers[k].harvest_rate * _weighted_on_density(scenario, rho)
    return float(num / (scenario.user_density * pc * w[k]))


def _g_scalar(s: float, battery: int) -> float:
    if s < 0.0:
        raise ScenarioError(f"load ratio must be nonnegative (got {s})")
    n = battery
    if abs(s - 1.0) < _S_DEGENERATE:
        return n / (n + 1.0) + (s - 1.0) * n / (2.0 * (n + 1.0))
    if s > 1.0 and (n + 1) * math.log(s) > 700.0:
        return 1.0 - (s - 1.0) * math.exp(-(n + 1) * math.log(s))
    return 1.0 - (1.0 - s) / (1.0 - s ** (n + 1))


def g(scenario: NetworkScenario, rho, k: int) -> float:
    """Right-hand side of the tier-k availability fixed-point equation.

    1 - (1 - s_k)/(1 - s_k^(N_k+1)) with s_k the load ratio at rho; equals
    the stationary ON probability of the tier-k energy chain.  Continuous
    at s_k = 1 with value N/(N+1).
    """
    return _g_scalar(load_ratio(scenario, rho, k), scenario.tiers[k].battery)


def check_feasibility(scenario: NetworkScenario) -> tuple[bool, float]:
    """(gamma > 1, gamma): gamma = sum lambda_k mu_k / (lambda_u P_c).

    gamma is the over-provisioning factor, total harvested energy per unit
    area and time over effective demand.  A positive availability fixed
    point exists iff gamma exceeds one.
    """
    validate(scenario)
    harvested = float(np.sum(scenario.densities() * scenario.harvest_rates()))
    gamma = harvested / (scenario.user_density * coverage_prob(scenario))
    return gamma > 1.0, gamma


def energy_outage_bound(scenario: NetworkScenario) -> float:
    """Lower bound on the fraction of users that must be dropped: max(0, 1-gamma)."""
    _, gamma = check_feasibility(scenario)
    return max(0.0, 1.0 - gamma)


def equivalence_check(scenario: NetworkScenario, rho) -> bool:
    """True iff mu_k/nu_k(rho) > rho_k for every tier (all rho_k > 0).

    At the fixed point this holds exactly when gamma > 1; it is the
    per-tier form of the energy conservation principle.
    """
    rho = check_availability_vector(rho, scenario.k_tiers)
    if np.any(rho <= 0.0):
        raise ScenarioError("equivalence check requires strictly positive rho")
    return all(
        load_ratio(scenario, rho, k) > rho[k] for k in range(scenario.k_tiers))


def _normalize_policy(scenario: NetworkScenario, policy) -> list[markov.PolicySpec]:
    k = scenario.k_tiers
    if policy is None:
        return [markov.PolicySpec(1)] * k
    if isinstance(policy, markov.PolicySpec):
        policy = [policy] * k
    out = []
    for i, p in enumerate(policy):
        if p is None:
            p = markov.PolicySpec(1)
        elif isinstance(p, (int, np.integer)):
            p = markov.PolicySpec(int(p))
        p.check(markov.BirthDeathSpec(
            scenario.tiers[i].harvest_rate, 1.0, scenario.tiers[i].battery))
        out.append(p)
    if len(out) != k:
        raise ScenarioError(f"policy list must have {k} entries (got {len(out)})")
    return out


def _availability_update(scenario: NetworkScenario, rho: np.ndarray,
                         policies: list[markov.PolicySpec]) -> np.ndarray:
    out = np.empty_like(rho)
    for k, pol in enumerate(policies):
        tier = scenario.tiers[k]
        s = load_ratio(scenario, rho, k)
        if s <= 0.0:
            out[k] = 0.0
        elif pol.cutoff == 1:
            out[k] = _g_scalar(s, tier.battery)
        else:
            spec = markov.BirthDeathSpec(
                tier.harvest_rate, tier.harvest_rate / s, tier.battery)
            out[k] = markov.policy_availability(spec, pol)
    return out


def solve_availability(scenario: NetworkScenario, policy=None,
                       tolerance: float = 1e-10,
                       max_iter: int = 100_000) -> FixedPointResult:
    """Solve rho_k = g_k(rho) for all tiers by monotone fixed-point iteration.

    Starts at rho = (1, ..., 1), which dominates every fixed point; since
    the update map is increasing the iterates decrease monotonically onto
    the largest fixed point.  `policy` selects per-tier recharge cutoffs
    (default 1 for every tier, the closed-form g); cutoff c substitutes the
    mean-hitting-time availability of the S(c) policy.  Infeasible
    scenarios (gamma <= 1) return the all-zero vector without iterating.
    """
    feasible, _ = check_feasibility(scenario)
    policies = _normalize_policy(scenario, policy)
    if not feasible:
        return FixedPointResult(rho=np.zeros(scenario.k_tiers), iterations=0,
                                residual=0.0, feasible=False)
    rho = np.ones(scenario.k_tiers)
    for it in range(1, max_iter + 1):
        nxt = _availability_update(scenario, rho, policies)
        step = float(np.max(np.abs(nxt - rho)))
        rho = nxt
        if step <= tolerance:
            residual = float(np.max(np.abs(
                _availability_update(scenario, rho, policies) - rho)))
            if residual <= tolerance:
                return FixedPointResult(rho=rho, iterations=it,
                                        residual=residual, feasible=True)
    residual = float(np.max(np.abs(
        _availability_update(scenario, rho, policies) - rho)))
    raise NonConvergenceError(rho, residual, max_iter)
