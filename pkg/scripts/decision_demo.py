#!/usr/bin/env python3
"""Crop-insurance example and the value-of-information property sweeps."""

import argparse

import numpy as np

from onsetblend import decision


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    problem, scheme = decision.insurance_problem(), decision.insurance_scheme()
    eu = decision.expected_payoffs(problem, problem.prior)
    income = problem.income @ problem.prior
    print("income matrix (rows: actions, columns: states)")
    for action, row in zip(problem.actions, problem.income):
        print(f"  {action:<13} {row}")
    print(f"\nprior {problem.prior}, utility sqrt(income)")
    for action, u, h in zip(problem.actions, eu, income):
        print(f"  {action:<13} expected utility {u:.4f}, expected income {h:.4f}")

    gain, change = decision.expected_income_effect(problem, scheme)
    print("\nforecast: 80% 'no drought' (certain), 20% 'elevated' (drought 50%)")
    print(f"  informed expected utility {decision.informed_expected_payoff(problem, scheme):.4f} (gain {gain:+.4f})")
    print(f"  informed expected income  {decision.expected_income(problem, scheme):.4f} (change {change:+.4f})")
    full = decision.ForecastScheme.full_information(problem.prior)
    print(f"  perfect forecast gain     {decision.scheme_value(problem, full):+.4f}")

    rng = np.random.default_rng(args.seed)
    print("\nproperty sweeps (violations / cases, worst margin)")
    for name, res in (
        ("coarsened forecast never worth more", decision.sweep_coarsening(rng, 100)),
        ("forecast value nonnegative", decision.sweep_nonnegative_value(rng, 200)),
        ("benefiting farmers >= expected changes", decision.sweep_change_bound(rng, 200)),
    ):
        print(f"  {name:<40} {res.violations}/{res.cases}  {res.worst_margin:.3g}")


if __name__ == "__main__":
    main()
