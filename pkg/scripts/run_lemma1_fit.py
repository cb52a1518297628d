#!/usr/bin/env python3
"""Fit the convergence decomposition E(dev^2) = c1 * Var(eps) + c2 from
Monte Carlo SGD ensembles and compare the slope against s_T * dim."""

import argparse

from bevlab.losses import LossKind, NoiseModel, closed_form_variance
from bevlab.sgd import SgdConfig, StepSchedule, fit_lemma1, run_ensemble

CONFIGS = [
    (LossKind.l1(), 1.0),
    (LossKind.l1(), 0.5),
    (LossKind.l2(), 0.25),
    (LossKind.l2(), 0.5),
    (LossKind.l2(), 1.0),
    (LossKind.dice(4.0), 0.5),
    (LossKind.dice(12.0), 0.5),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--steps", type=int, default=5000)
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    points = []
    for i, (loss, sigma) in enumerate(CONFIGS):
        cfg = SgdConfig(
            dim=args.dim, sigma=sigma, loss=loss, steps=args.steps,
            trials=args.trials, base_seed=args.seed + i,
        )
        stats = run_ensemble(cfg)
        var = closed_form_variance(loss, NoiseModel(sigma))
        points.append((var, stats.mean_deviation_sq))
        print(f"{loss.label():<12} sigma={sigma:<5g} var={var:<12.6g} mean_dev_sq={stats.mean_deviation_sq:.6g}")
    fit = fit_lemma1(points)
    expected = StepSchedule().cumulative_square_sum(args.steps) * args.dim
    print(f"fit: c1={fit.c1:.4f} c2={fit.c2:.4g} r2={fit.r_squared:.5f} (expected slope {expected:.4f})")


if __name__ == "__main__":
    main()
