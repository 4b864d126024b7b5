#!/usr/bin/env python3
"""Piecewise control-shape optimization against the Gaussian baseline.

Optimizes read-in control amplitude knots at a fixed energy budget and
reports the improvement in internal memory efficiency over the default
Gaussian control at the same budget.
"""

import argparse
from dataclasses import replace

import numpy as np

from orcasim import optimizer as optim
from orcasim.config import build_experiment, load_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--budget", type=int, default=300, help="solver evaluations")
    parser.add_argument("--n-knots", type=int, default=8)
    parser.add_argument("--energy", type=float, default=1.2e-9, help="control energy, J")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trace", default=None, help="CSV trace path (resumable)")
    args = parser.parse_args()

    experiment = build_experiment(load_config(args.config))
    sequence = experiment.sequence
    experiment = replace(
        experiment,
        sequence=sequence.with_energies(args.energy, sequence.control_out.energy),
    )

    baseline = experiment.run().eta_mem_window
    print(f"gaussian baseline at {args.energy * 1e9:.2f} nJ: eta_mem = {baseline:.4f}")

    param = optim.ControlParameterization(
        basis=optim.PulseBasis.PIECEWISE,
        bounds=[(0.0, 1.0)] * args.n_knots,
        total_energy_budget=args.energy,
        knot_times=np.linspace(-800e-12, 800e-12, args.n_knots),
    )
    result = optim.optimize_control(
        "eta_mem", param, experiment,
        budget=args.budget, seed=args.seed, trace_path=args.trace,
    )
    print(f"optimized eta_mem = {result.best_value:.4f} "
          f"({result.n_evaluations} evaluations, {result.n_failures} failures)")
    print(f"gain over baseline: {result.best_value - baseline:+.4f}")
    print("knots:", np.array2string(result.best_params, precision=4))


if __name__ == "__main__":
    main()
