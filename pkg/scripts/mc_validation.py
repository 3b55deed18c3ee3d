"""Monte Carlo check of the closed-form expected utility for several holding paths."""
import argparse
import json
import sys

import numpy as np

from imitation_portfolio.asymptotics import asymptotic_decision
from imitation_portfolio.constants import solve
from imitation_portfolio.market import Trajectory, expected_utility, baseline_spec, uniform_grid
from imitation_portfolio.oracle import McConfig, default_workers, mc_exact_gaussian, mc_expected_utility


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--case", type=int, default=1, choices=(1, 2))
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--output", default="mc_validation.json")
    args = ap.parse_args()
    spec = baseline_spec(theta=args.theta, case=args.case)
    grid = uniform_grid(spec.horizon_T, 2001)
    paths = {"zero": np.zeros_like(grid), "P1_bar": spec.retail_rational(grid),
             "P2_bar": spec.expert_rational(grid),
             "P1_star": solve(spec).solution.evaluate(grid),
             "P1_inf": asymptotic_decision(spec)(grid)}
    cfg = McConfig(paths=args.paths, steps=args.steps, seed=args.seed, workers=args.workers)
    rows, worst = [], 0.0
    for name, vals in paths.items():
        p = Trajectory(grid, vals)
        exact = expected_utility(p, spec)
        em, em_se = mc_expected_utility(p, spec, cfg)
        ga, ga_se = mc_exact_gaussian(p, spec, cfg)
        z = abs(em - exact) / em_se if em_se > 0 else 0.0
        worst = max(worst, z)
        rows.append({"path": name, "closed_form": exact, "euler_maruyama": em, "em_se": em_se,
                     "exact_gaussian": ga, "gaussian_se": ga_se, "z": z})
        print(f"{name:>8}: closed form {exact:.6f}  EM {em:.6f} +- {em_se:.1e}  "
              f"exact-Gaussian {ga:.6f}  |z| {z:.2f}")
    with open(args.output, "w") as fh:
        json.dump({"config": vars(args), "results": rows}, fh, indent=2)
    return 0 if worst <= 3 else 1


if __name__ == "__main__":
    sys.exit(main())
