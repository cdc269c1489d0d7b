"""Birth-death CTMC machinery for the per-BS energy queue.

The energy level of a single BS evolves as a birth-death chain on states
0..N: energy units arrive at the harvest rate mu and, while the BS is ON,
depart at the utilization rate nu.  Everything downstream (availabilities,
recharge policies, the S(1) optimality check) reduces to the stationary
distribution of this chain and the mean time to hit level 0, both available
in closed form through the ratio r = mu/nu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ScenarioError, SimEstimate

# Below this distance from r = 1, closed forms with (1 - r) denominators are
# replaced by cancellation-free power sums (their exact limits).
_R_DEGENERATE = 1e-6
# z quantile for two-sided 99% confidence intervals.
_Z99 = 2.5758293035489004


@dataclass(frozen=True)
class BirthDeathSpec:
    """(mu, nu, N): harvest rate, utilization rate, battery capacity."""

    harvest_rate: float
    utilization_rate: float
    battery: int

    def __post_init__(self):
        if not self.harvest_rate > 0:
            raise ScenarioError(f"harvest_rate must be > 0 (got {self.harvest_rate})")
        if not self.utilization_rate > 0:
            raise ScenarioError(
                f"utilization_rate must be > 0 (got {self.utilization_rate})")
        if not (isinstance(self.battery, (int, np.integer)) and self.battery >= 1):
            raise ScenarioError(f"battery must be an integer >= 1 (got {self.battery})")

    @property
    def ratio(self) -> float:
        return self.harvest_rate / self.utilization_rate


@dataclass(frozen=True)
class PolicySpec:
    """Recharge policy S(cutoff): turn ON once the battery reaches `cutoff`.

    cutoff = 1 is Policy 1 (turn ON at the first harvested unit); cutoff = N
    is Policy 2 (wait for a full battery).
    """

    cutoff: int = 1

    def check(self, spec: BirthDeathSpec) -> None:
        if not (isinstance(self.cutoff, (int, np.integer))
                and 1 <= self.cutoff <= spec.battery):
            raise ScenarioError(
                f"cutoff must be an integer in [1, {spec.battery}] (got {self.cutoff})")


def generator(spec: BirthDeathSpec) -> np.ndarray:
    """(N+1)x(N+1) CTMC generator, states ordered by energy level 0..N."""
    n = spec.battery
    mu, nu = spec.harvest_rate, spec.utilization_rate
    a = np.zeros((n + 1, n + 1))
    idx = np.arange(n)
    a[idx, idx + 1] = mu          # births: harvest one unit
    a[idx + 1, idx] = nu          # deaths: serve users, only above level 0
    a[np.arange(n + 1), np.arange(n + 1)] = -a.sum(axis=1)
    return a


def stationary(spec: BirthDeathSpec) -> np.ndarray:
    """Stationary distribution pi_i proportional to r^i, computed in log space."""
    n = spec.battery
    logw = np.arange(n + 1) * math.log(spec.ratio)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def _geometric_sum(r: float, m: int) -> float:
    """S_m = 1 + r + ... + r^(m-1); power sum near r=1, closed form otherwise."""
    if m <= 0:
        return 0.0
    if abs(r - 1.0) < _R_DEGENERATE:
        return float(np.sum(r ** np.arange(m)))
    if r > 1.0 and m * math.log(r) > 709.0:
        return math.inf
    return float((r ** m - 1.0) / (r - 1.0))


def neg_b_inverse_entry(spec: BirthDeathSpec, i: int, j: int) -> float:
    """Entry (i, j) of (-B)^-1 where B is the generator minus row/column 0.

    Closed form: (1/nu) * sum_{n=1}^{min(i,j)} r^(j-n), the ratio form of
    nu^-j sum mu^(j-n) nu^(n-1).
    """
    n = spec.battery
    if not (1 <= i <= n and 1 <= j <= n):
        raise ScenarioError(f"indices must lie in [1, {n}] (got i={i}, j={j})")
    r = spec.ratio
    m = min(i, j)
    with np.errstate(over="ignore"):
        powers = r ** (j - np.arange(1, m + 1, dtype=float))
    return float(powers.sum() / spec.utilization_rate)


def neg_b_inverse(spec: BirthDeathSpec) -> np.ndarray:
    """Full NxN matrix of neg_b_inverse_entry, vectorized.

    M[i, j] = (1/nu) * r^(j-m) * S_m with m = min(i, j); the partial sums
    S_m come from a cumulative sum of powers, which is exact at r = 1.
    """
    n = spec.battery
    r = spec.ratio
    with np.errstate(over="ignore"):
        s = np.cumsum(r ** np.arange(n, dtype=float))         # s[m-1] = S_m
        ii = np.arange(1, n + 1)
        m = np.minimum.outer(ii, ii)
        mat = r ** (ii[None, :] - m) * s[m - 1] / spec.utilization_rate
    return mat


def mean_on_time(spec: BirthDeathSpec, start_level: int) -> float:
    """E[J1(i)]: mean time for the ON chain to hit level 0 from level i.

    Row sum of (-B)^-1: (1/nu) * [sum_{j<=i} S_j + S_i * r * S_(N-i)].
    For start_level=1 this is the Policy-1 form (1/nu)(1-r^N)/(1-r); for
    start_level=N it matches the Policy-2 closed form.  Overflows to inf for
    r > 1 with enormous N, where the true value exceeds double range.
    """
    n = spec.battery
    i = start_level
    if not (isinstance(i, (int, np.integer)) and 1 <= i <= n):
        raise ScenarioError(f"start_level must be in [1, {n}] (got {i})")
    r = spec.ratio
    if abs(r - 1.0) < _R_DEGENERATE:
        t = np.arange(i, dtype=float)
        head = float(np.sum((i - t) * r ** t))
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            head = (r * _geometric_sum(r, i) - i) / (r - 1.0)
    s_rest = _geometric_sum(r, n - i)
    with np.errstate(over="ignore", invalid="ignore"):
        # s_rest = 0 at i = N; skip the product so an infinite S_i cannot
        # turn the mathematically zero term into nan
        tail = _geometric_sum(r, i) * r * s_rest if s_rest > 0.0 else 0.0
        total = (head + tail) / spec.utilization_rate
    return float(total)


def mean_off_time(spec: BirthDeathSpec, policy: PolicySpec) -> float:
    """E[J2]: mean OFF time, i.e. time to harvest `cutoff` units from empty."""
    policy.check(spec)
    return policy.cutoff / spec.harvest_rate


def policy_availability(spec: BirthDeathSpec, policy: PolicySpec) -> float:
    """Long-run ON fraction under S(cutoff): 1/(1 + cutoff/(mu E[J1(cutoff)]))."""
    policy.check(spec)
    ej1 = mean_on_time(spec, policy.cutoff)
    if math.isinf(ej1):
        return 1.0
    return 1.0 / (1.0 + policy.cutoff / (spec.harvest_rate * ej1))


def verify_s1_optimal(spec: BirthDeathSpec) -> int:
    """argmax over i of E[J1(i)]/i; equals 1 because the ratio is decreasing.

    Works in log space through the level-passage decomposition
    E[J1(i)] = (1/nu) sum_{j<=i} S_(N-j+1), so battery/ratio combinations
    whose hitting times overflow doubles still compare correctly.  Ties
    below 1e-10 relative (the ratio flattens to float resolution for
    r far from 1) resolve to the smallest level.
    """
    n = spec.battery
    logr = math.log(spec.ratio)
    # log S_m for m = 1..N via cumulative log-sum-exp of the power series
    log_s = np.logaddexp.accumulate(np.arange(n, dtype=float) * logr)
    # log E[J1(i)] accumulates the per-level descent times S_(N-j+1)/nu
    log_e = np.logaddexp.accumulate(log_s[::-1]) - math.log(
        spec.utilization_rate)
    log_ratio = log_e - np.log(np.arange(1, n + 1, dtype=float))
    best = log_ratio.max()
    return int(np.argmax(log_ratio >= best - 1e-10)) + 1


def simulate_on_off(spec: BirthDeathSpec, policy: PolicySpec, cycles: int,
                    seed: int = 0) -> SimEstimate:
    """Estimate availability from `cycles` regenerative ON/OFF cycles.

    ON periods run the exact jump chain (exponential clocks, birth rate mu
    except at the full battery, death rate nu) from the cutoff level until
    level 0, vectorized across cycles.  OFF periods are birth-only, so their
    duration is Erlang(cutoff, mu), drawn directly.  The estimate is
    sum(ON)/(sum(ON)+sum(OFF)) with a delta-method 99% CI.
    """
    policy.check(spec)
    if cycles < 2:
        raise ScenarioError(f"cycles must be >= 2 (got {cycles})")
    rng = np.random.default_rng([seed, 0x0E])
    mu, nu, n = spec.harvest_rate, spec.utilization_rate, spec.battery

    level = np.full(cycles, policy.cutoff, dtype=np.int64)
    on = np.zeros(cycles)
    idx = np.arange(cycles)
    while idx.size:
        lv = level[idx]
        full = lv == n
        rate = np.where(full, nu, mu + nu)
        on[idx] += rng.exponential(1.0, idx.size) / rate
        up = (~full) & (rng.random(idx.size) * rate < mu)
        level[idx] = lv + np.where(up, 1, -1)
        idx = idx[level[idx] > 0]
    off = rng.gamma(policy.cutoff, 1.0 / mu, cycles)

    x, y = on.mean(), off.mean()
    rho = x / (x + y)
    vx = on.var(ddof=1) / cycles
    vy = off.var(ddof=1) / cycles
    cxy = float(np.cov(on, off, ddof=1)[0, 1]) / cycles
    var = (y * y * vx + x * x * vy - 2 * x * y * cxy) / (x + y) ** 4
    return SimEstimate(mean=float(rho), ci_halfwidth_99=float(_Z99 * math.sqrt(max(var, 0.0))),
                       samples=int(cycles), seed=int(seed))
