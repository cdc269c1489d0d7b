"""Batch command line front-end.

Subcommands read a scenario JSON file and print CSV to stdout, so figure
data can be regenerated and piped straight into plotting tools.  All dB to
linear conversion happens here; the library works in linear units.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible scenario under
--strict, 3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import analytic, coverage, markov, region, simulate
from .model import (
    NO_SHADOWING,
    NetworkScenario,
    ScenarioError,
    ShadowingSpec,
    TierParams,
    validate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(message)


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def load_scenario(path: str) -> tuple[NetworkScenario, dict]:
    """Parse a scenario JSON file; returns the scenario and the raw document.

    The document may give `user_density` directly or an `over_provisioning`
    factor gamma, in which case lambda_u = sum(lambda_k mu_k)/(gamma P_c);
    `sir_target_db` is accepted in place of the linear `sir_target`.
    """
    with open(path) as fh:
        doc = json.load(fh)
    tiers = []
    for i, entry in enumerate(doc.get("tiers", [])):
        try:
            sh = entry.get("shadowing")
            shadow = ShadowingSpec(mean_db=float(sh.get("mean_db", 0.0)),
                                   std_db=float(sh.get("std_db", 0.0))) \
                if sh else NO_SHADOWING
            tiers.append(TierParams(
                density=float(entry["density"]),
                tx_power=float(entry["tx_power"]),
                harvest_rate=float(entry["harvest_rate"]),
                battery=int(entry["battery"]),
                shadowing=shadow))
        except KeyError as exc:
            raise ScenarioError(f"tier {i}: missing field {exc}") from None
    if not tiers:
        raise ScenarioError("scenario must define at least one tier")
    alpha = float(doc.get("path_loss_exp", 4.0))
    if "sir_target" in doc:
        beta = float(doc["sir_target"])
    elif "sir_target_db" in doc:
        beta = _db_to_linear(float(doc["sir_target_db"]))
    else:
        raise ScenarioError("scenario must set sir_target or sir_target_db")
    if "user_density" in doc:
        lam_u = float(doc["user_density"])
    elif "over_provisioning" in doc:
        gamma = float(doc["over_provisioning"])
        if gamma <= 0:
            raise ScenarioError(f"over_provisioning must be > 0 (got {gamma})")
        pc = 1.0 / (1.0 + coverage.hyper_f(beta, alpha))
        harvested = sum(t.density * t.harvest_rate for t in tiers)
        lam_u = harvested / (gamma * pc)
    else:
        raise ScenarioError("scenario must set user_density or over_provisioning")
    scenario = NetworkScenario(tiers=tuple(tiers), path_loss_exp=alpha,
                               sir_target=beta, user_density=lam_u)
    validate(scenario)
    return scenario, doc


def _parse_tier_cutoff(text: str, scenario: NetworkScenario) -> tuple[int, int]:
    """'k=2' pins tier 2 (1-based) to its full battery; 'k=2:5' to cutoff 5."""
    body = text[2:] if text.startswith("k=") else text
    tier_txt, _, cut_txt = body.partition(":")
    try:
        tier = int(tier_txt)
    except ValueError:
        raise _UsageError(f"cannot parse tier assignment {text!r}") from None
    if not 1 <= tier <= scenario.k_tiers:
        raise _UsageError(f"tier index {tier} out of range 1..{scenario.k_tiers}")
    battery = scenario.tiers[tier - 1].battery
    if cut_txt:
        try:
            cutoff = int(cut_txt)
        except ValueError:
            raise _UsageError(f"cannot parse cutoff in {text!r}") from None
    else:
        cutoff = battery
    if not 1 <= cutoff <= battery:
        raise _UsageError(f"cutoff {cutoff} outside [1, {battery}] for tier {tier}")
    return tier - 1, cutoff


def _parse_rho(text: str, scenario: NetworkScenario) -> np.ndarray:
    try:
        rho = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise _UsageError(f"cannot parse availability vector {text!r}") from None
    if rho.shape != (scenario.k_tiers,):
        raise _UsageError(
            f"availability vector needs {scenario.k_tiers} components")
    return rho


def _resolve_rho(args, scenario: NetworkScenario) -> np.ndarray:
    if getattr(args, "rho", None):
        return _parse_rho(args.rho, scenario)
    result = analytic.solve_availability(scenario)
    if not result.feasible:
        raise ScenarioError(
            "scenario is infeasible and no --rho was given; supply one")
    return result.rho


def _sim_config(args, doc: dict, scenario: NetworkScenario,
                rho: np.ndarray) -> simulate.SimConfig:
    block = doc.get("sim", {})
    side = getattr(args, "window", None) or block.get("window_side")
    if side is None:
        side = simulate.suggest_window_side(scenario, rho)
    reps = getattr(args, "replicates", None) or block.get("replicates", 20)
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = block.get("seed", 0)
    return simulate.SimConfig(
        window_side=float(side), replicates=int(reps), seed=int(seed),
        boundary=block.get("boundary", "toroidal"),
        guard_margin=float(block.get("guard_margin", 0.0)))


def _writer():
    return csv.writer(sys.stdout, lineterminator="\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def cmd_availability(args) -> int:
    scenario, _ = load_scenario(args.scenario)
    cutoffs = [1] * scenario.k_tiers
    for text in args.policy2 or []:
        tier, cutoff = _parse_tier_cutoff(text, scenario)
        cutoffs[tier] = cutoff
    policy = [markov.PolicySpec(c) for c in cutoffs]
    result = analytic.solve_availability(scenario, policy=policy,
                                         tolerance=args.tol)
    _, gamma = analytic.check_feasibility(scenario)
    out = _writer()
    out.writerow(["tier", "policy", "rho", "gamma", "feasible",
                  "iterations", "residual"])
    for k in range(scenario.k_tiers):
        out.writerow([k + 1, f"S({cutoffs[k]})", _fmt(float(result.rho[k])),
                      _fmt(gamma), result.feasible, result.iterations,
                      _fmt(result.residual)])
    if args.strict and not result.feasible:
        print("scenario is infeasible (gamma <= 1)", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_region(args) -> int:
    scenario, _ = load_scenario(args.scenario)
    if scenario.k_tiers != 2:
        raise ScenarioError("region sweeps require exactly 2 tiers")
    constraints: dict[int, markov.PolicySpec] = {}
    for text in args.constrain or []:
        tier, cutoff = _parse_tier_cutoff(text, scenario)
        constraints[tier] = markov.PolicySpec(cutoff)
    b0 = region.sweep_boundary(scenario, 0, args.grid, constraints.get(0))
    b1 = region.sweep_boundary(scenario, 1, args.grid, constraints.get(1))
    out = _writer()
    out.writerow(["grid", "rho1_star_given_rho2", "rho2_star_given_rho1"])
    for t, v0, v1 in zip(b0.grid, b0.values, b1.values):
        out.writerow([_fmt(float(t)), _fmt(float(v0)), _fmt(float(v1))])
    return EXIT_OK


def cmd_coverage(args) -> int:
    scenario, _ = load_scenario(args.scenario)
    if args.sir_target_db is not None:
        scenario = NetworkScenario(
            tiers=scenario.tiers, path_loss_exp=scenario.path_loss_exp,
            sir_target=_db_to_linear(args.sir_target_db),
            user_density=scenario.user_density)
    out = _writer()
    out.writerow(["sir_target", "path_loss_exp", "coverage"])
    out.writerow([_fmt(scenario.sir_target), _fmt(scenario.path_loss_exp),
                  _fmt(coverage.coverage_prob(scenario))])
    return EXIT_OK


def cmd_rate(args) -> int:
    scenario, doc = load_scenario(args.scenario)
    out = _writer()
    if args.surface:
        if scenario.k_tiers != 2:
            raise ScenarioError("rate surfaces require exactly 2 tiers")
        target = args.rate_target if args.rate_target is not None else 0.1
        query = coverage.RateQuery(rate_target=target)
        grid = np.linspace(0.1, 1.0, args.grid)
        out.writerow(["rho1", "rho2", "rate_ccdf"])
        for r1 in grid:
            for r2 in grid:
                val = coverage.rate_ccdf(scenario, [r1, r2], query)
                out.writerow([_fmt(float(r1)), _fmt(float(r2)), _fmt(val)])
        return EXIT_OK
    rho = _resolve_rho(args, scenario)
    sweep = doc.get("sweep", {})
    if args.rate_target is not None:
        targets = [args.rate_target]
    elif sweep.get("variable") == "rate_target":
        targets = np.linspace(float(sweep["start"]), float(sweep["stop"]),
                              int(sweep["steps"])).tolist()
    else:
        targets = np.linspace(0.0, 2.0, 41).tolist()
    out.writerow(["rate_target", "rate_ccdf"])
    for t in targets:
        val = coverage.rate_ccdf(scenario, rho, coverage.RateQuery(rate_target=t))
        out.writerow([_fmt(float(t)), _fmt(val)])
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario, doc = load_scenario(args.scenario)
    rho = _resolve_rho(args, scenario)
    config = _sim_config(args, doc, scenario, rho)
    out = _writer()
    out.writerow(["estimator", "tier", "rate_target", "mean",
                  "ci_halfwidth_99", "samples", "seed"])

    def row(name, tier, target, est):
        out.writerow([name, tier, _fmt(target) if target is not None else "",
                      _fmt(est.mean), _fmt(est.ci_halfwidth_99),
                      est.samples, est.seed])

    kind = args.estimator
    if args.tier is not None and not 1 <= args.tier <= scenario.k_tiers:
        raise _UsageError(f"tier index {args.tier} out of range "
                          f"1..{scenario.k_tiers}")
    if kind == "coverage":
        row("coverage", "", None, simulate.coverage_mc(scenario, rho, config))
    elif kind == "association":
        for k, est in enumerate(simulate.association_mc(scenario, rho, config)):
            row("association", k + 1, None, est)
    elif kind == "area":
        tiers = [args.tier - 1] if args.tier else range(scenario.k_tiers)
        for k in tiers:
            row("area", k + 1, None,
                simulate.service_area_mc(scenario, rho, k, config))
    else:
        target = args.rate_target if args.rate_target is not None else 0.1
        row("rate", "", target, simulate.rate_mc(scenario, rho, target, config))
    return EXIT_OK


def _check(lines, name, analytic_val, oracle_val, tol, seed) -> bool:
    diff = abs(analytic_val - oracle_val)
    ok = diff <= tol
    lines.append(f"{'PASS' if ok else 'FAIL'} {name}: analytic={analytic_val:.6f} "
                 f"oracle={oracle_val:.6f} |diff|={diff:.3e} tol={tol:.3e} "
                 f"seed={seed}")
    return ok


def cmd_validate(args) -> int:
    scenario, doc = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else doc.get("sim", {}).get("seed", 0)
    lines: list[str] = []
    ok = True

    # Hitting-time closed form against a dense solve of the same generator.
    # The ratio is pinned near 1 so matrix entries stay O(1) and the identity
    # comparison is meaningful at the 1e-9 scale.
    tier0 = scenario.tiers[0]
    spec = markov.BirthDeathSpec(tier0.harvest_rate, tier0.harvest_rate / 1.2,
                                 min(tier0.battery, 40))
    m = markov.neg_b_inverse(spec)
    b = -markov.generator(spec)[1:, 1:]
    err = float(np.max(np.abs(m @ b - np.eye(spec.battery))))
    ok &= _check(lines, "inverse-vs-dense", 0.0, err, 1e-9, "-")

    result = analytic.solve_availability(scenario)
    if result.feasible:
        rho = result.rho
        for k in range(scenario.k_tiers):
            tier = scenario.tiers[k]
            nu = analytic.energy_utilization(scenario, rho, k)
            bd = markov.BirthDeathSpec(tier.harvest_rate, nu, tier.battery)
            # A cycle costs about (mu+nu) E[J1] transitions; skip tiers whose
            # cycles are so long that trajectory simulation would stall the
            # report (their OFF fraction is unresolvable by simulation anyway).
            per_cycle = (tier.harvest_rate + nu) * markov.mean_on_time(bd, 1) + 1
            if not math.isfinite(per_cycle) or per_cycle > 1e5:
                lines.append(f"SKIP availability-ctmc-tier{k + 1}: mean ON "
                             f"time too long for trajectory simulation")
                continue
            cycles = int(min(100_000, 4e8 / per_cycle))
            sim = markov.simulate_on_off(bd, markov.PolicySpec(1),
                                         cycles=cycles, seed=seed + k)
            ok &= _check(lines, f"availability-ctmc-tier{k + 1}",
                         float(rho[k]), sim.mean, sim.ci_halfwidth_99, sim.seed)
    else:
        rho = np.ones(scenario.k_tiers)
        lines.append("SKIP availability-ctmc: scenario infeasible, "
                     "using rho=1 for the spatial checks")
    config = _sim_config(args, doc, scenario, rho)

    pc = coverage.coverage_prob(scenario)
    est = simulate.coverage_mc(scenario, rho, config)
    ok &= _check(lines, "coverage-mc", pc, est.mean,
                 est.ci_halfwidth_99 + 0.01, est.seed)

    for k in range(scenario.k_tiers):
        area = analytic.mean_service_area(scenario, rho, k)
        est = simulate.service_area_mc(scenario, rho, k, config)
        ok &= _check(lines, f"service-area-tier{k + 1}", area, est.mean,
                     est.ci_halfwidth_99 + 0.02 * area, est.seed)

    assoc = simulate.association_mc(scenario, rho, config)
    for k in range(scenario.k_tiers):
        pk = coverage.tier_association_prob(scenario, rho, k)
        ok &= _check(lines, f"association-tier{k + 1}", pk, assoc[k].mean,
                     assoc[k].ci_halfwidth_99 + 0.01, assoc[k].seed)

    target = args.rate_target if args.rate_target is not None else 0.1
    series = coverage.rate_ccdf(scenario, rho,
                                coverage.RateQuery(rate_target=target))
    est = simulate.rate_mc(scenario, rho, target, config)
    ok &= _check(lines, "rate-mc", series, est.mean, 0.03, est.seed)

    print("\n".join(lines))
    print("all checks passed" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_VALIDATION


def _build_parser() -> _Parser:
    parser = _Parser(prog="harvnet",
                     description="availability, coverage, and rate analysis "
                                 "of energy-harvesting cellular networks")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file")
        p.set_defaults(func=fn)
        return p

    p = add("availability", cmd_availability,
            "solve the availability fixed point")
    p.add_argument("--policy2", action="append", metavar="k=TIER[:CUTOFF]",
                   help="pin a tier to recharge policy S(battery) or S(cutoff)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--strict", action="store_true",
                   help="exit 2 when the scenario is infeasible")

    p = add("region", cmd_region, "sweep the two-tier availability region")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--constrain", action="append", metavar="k=TIER[:CUTOFF]",
                   help="constrain a tier to S(battery) or S(cutoff)")

    p = add("coverage", cmd_coverage, "analytic SIR coverage probability")
    p.add_argument("--sir-target-db", type=float, default=None,
                   help="override the scenario SIR target, in dB")

    p = add("rate", cmd_rate, "downlink rate CCDF (grid over T or rho surface)")
    p.add_argument("--rho", help="comma-separated availabilities "
                                 "(default: solved fixed point)")
    p.add_argument("--rate-target", type=float, default=None,
                   help="single rate threshold in bps/Hz")
    p.add_argument("--surface", action="store_true",
                   help="sweep (rho1, rho2) instead of the rate threshold")
    p.add_argument("--grid", type=int, default=10,
                   help="points per axis for --surface")

    p = add("simulate", cmd_simulate, "Monte Carlo oracles")
    p.add_argument("--estimator", choices=["coverage", "area", "rate",
                                           "association"], default="coverage")
    p.add_argument("--rho", help="comma-separated availabilities")
    p.add_argument("--tier", type=int, default=None,
                   help="tier (1-based) for --estimator area")
    p.add_argument("--rate-target", type=float, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--window", type=float, default=None,
                   help="override the simulation window side")

    p = add("validate", cmd_validate,
            "run every analytic-vs-oracle cross check")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rate-target", type=float, default=None)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:      # --help and friends
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except analytic.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
