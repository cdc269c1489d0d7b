"""Availability region: which availability vectors are jointly achievable.

The region boundary for tier k given the other tiers' availabilities is
the largest root of the scalar equation rho_k = g_k(rho); membership is a
per-coordinate comparison against these conditional boundaries.  A tier
can also be pinned to a recharge policy S(c), which shrinks the region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytic, markov
from .model import NetworkScenario, ScenarioError

_DELTA = 1e-12        # lower bracket end; 0 is always the trivial fixed point
_SCAN_POINTS = 129    # coarse descent grid locating the outermost root
_MEMBER_TOL = 1e-6    # slack for membership tests at the boundary itself


@dataclass(frozen=True)
class RegionBoundary:
    """Sampled boundary curve rho_k*(other availability) for a two-tier network."""

    tier: int
    grid: np.ndarray
    values: np.ndarray
    policy_constraint: markov.PolicySpec | None = None


def _tier_map(scenario: NetworkScenario, k: int, fixed_others) -> np.ndarray:
    others = np.asarray(fixed_others, dtype=float)
    if others.shape != (scenario.k_tiers - 1,):
        raise ScenarioError(
            f"fixed_others must have length {scenario.k_tiers - 1} "
            f"(got shape {others.shape})")
    if np.any(others < 0.0) or np.any(others > 1.0):
        raise ScenarioError("fixed_others components must lie in [0, 1]")
    rho = np.empty(scenario.k_tiers)
    rho[:k] = others[:k]
    rho[k + 1:] = others[k:]
    return rho


def boundary(scenario: NetworkScenario, k: int, fixed_others,
             constraint: markov.PolicySpec | None = None,
             tol: float = 1e-10) -> float:
    """Largest rho_k in [0, 1] with rho_k = g_k(rho), others held fixed.

    Returns 0.0 when no positive root exists (the tier cannot be ON at all
    given the conditioning load).  With `constraint`, the S(cutoff)
    availability formula replaces g_k.
    """
    rho = _tier_map(scenario, k, fixed_others)
    tier = scenario.tiers[k]

    def h(x: float) -> float:
        rho[k] = x
        s = analytic.load_ratio(scenario, rho, k)
        if constraint is None or constraint.cutoff == 1:
            val = analytic._g_scalar(s, tier.battery)
        elif s <= 0.0:
            val = 0.0
        else:
            spec = markov.BirthDeathSpec(
                tier.harvest_rate, tier.harvest_rate / s, tier.battery)
            val = markov.policy_availability(spec, constraint)
        return val - x

    if h(1.0) >= 0.0:
        return 1.0
    # Walk down from 1 to find the outermost sign change, then bisect.  g_k
    # is concave in rho_k, so a single downcrossing separates the region
    # from its complement; the scan only guards the policy-constrained map.
    xs = np.linspace(1.0, _DELTA, _SCAN_POINTS)
    hi = 1.0
    for x in xs[1:]:
        if h(float(x)) >= 0.0:
            lo = float(x)
            break
        hi = float(x)
    else:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def contains(scenario: NetworkScenario, rho, constraints=None,
             tol: float = _MEMBER_TOL) -> bool:
    """True iff every rho_k is at most its conditional boundary value.

    The region lives inside the unit box, so any point with a component
    outside [0, 1] is reported as not contained rather than rejected; that
    keeps perturbation probes just past a boundary at 1 well defined.
    `constraints` maps tier index to a PolicySpec for tiers pinned to a
    recharge policy; unlisted tiers use the unconstrained boundary.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (scenario.k_tiers,):
        raise ScenarioError(
            f"expected {scenario.k_tiers} availabilities (got shape {rho.shape})")
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        return False
    constraints = constraints or {}
    for k in range(scenario.k_tiers):
        others = np.delete(rho, k)
        if rho[k] > boundary(scenario, k, others, constraints.get(k)) + tol:
            return False
    return True


def sweep_boundary(scenario: NetworkScenario, k: int,
                   grid_resolution: int = 101,
                   constraint: markov.PolicySpec | None = None) -> RegionBoundary:
    """Boundary curve of tier k against the other tier's availability (K=2)."""
    if scenario.k_tiers != 2:
        raise ScenarioError(
            f"boundary sweeps require exactly 2 tiers (got {scenario.k_tiers})")
    if grid_resolution < 2:
        raise ScenarioError(f"grid_resolution must be >= 2 (got {grid_resolution})")
    grid = np.linspace(0.0, 1.0, grid_resolution)
    values = np.array(
        [boundary(scenario, k, [t], constraint) for t in grid])
    return RegionBoundary(tier=k, grid=grid, values=values,
                          policy_constraint=constraint)


def grid_coverage(scenario: NetworkScenario, resolution: int = 101,
                  constraints=None) -> float:
    """Fraction of the [0,1]^2 availability grid inside the region (K=2)."""
    constraints = constraints or {}
    b0 = sweep_boundary(scenario, 0, resolution, constraints.get(0))
    b1 = sweep_boundary(scenario, 1, resolution, constraints.get(1))
    t = b0.grid
    # Point (t[i], t[j]) is inside iff t[i] clears the tier-0 boundary at
    # rho_1 = t[j] and t[j] clears the tier-1 boundary at rho_0 = t[i].
    in0 = t[:, None] <= b0.values[None, :] + _MEMBER_TOL
    in1 = t[None, :] <= b1.values[:, None] + _MEMBER_TOL
    return float((in0 & in1).mean())
