"""How long the monotone flow needs to reach a given stationary residual.

Runs the monotone flow for V = sin(2 pi x), b = 0 from m0 = 1 + 0.2 cos(2 pi x),
u0 = 0.2 cos(2 pi x) and prints the residual and the errors against the exact
solution at several horizons.  The residual decays roughly like
exp(-t / max m), so a residual of 1e-6 needs t of about 25-30.

    python3 scripts/monotone_horizon.py [--n 100] [--t-max 40]
"""

import argparse

import numpy as np

from smfg.exact import exact_zero_drift
from smfg.flows import solve_monotonic_flow
from smfg.hamiltonian import make_grid_data
from smfg.integrators import FlowConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--t-max", type=float, default=40.0)
    parser.add_argument("--variant", default="standard", choices=["standard", "congestion"])
    args = parser.parse_args()

    data = make_grid_data(args.n, lambda x: np.sin(2 * np.pi * x), variant=args.variant)
    x = data.grid.nodes
    cfg = FlowConfig(t_max=args.t_max, rtol=1e-6, atol=1e-8, record_every=2.0, residual_stop=0.0)
    _, traj = solve_monotonic_flow(data, 1 + 0.2 * np.cos(2 * np.pi * x), 0.2 * np.cos(2 * np.pi * x), cfg)
    exact = exact_zero_drift(lambda s: np.sin(2 * np.pi * s), data.grid)
    print(f"{'t':>6} {'residual':>10} {'m_err':>10} {'u_max':>10} {'hbar_err':>10}")
    for t, r, m, u, h in zip(traj.times, traj.residual, traj.densities, traj.values, traj.hbar):
        print(f"{t:6.1f} {r:10.2e} {np.max(np.abs(m - exact.m)):10.2e} {np.max(np.abs(u)):10.2e} "
              f"{abs(h - exact.hbar):10.2e}")
    rates = -np.diff(np.log(traj.residual[1:])) / np.diff(traj.times[1:])
    print(f"late decay rate of the residual: {np.median(rates[len(rates) // 2:]):.3f} per unit time; "
          f"1 / max m = {1 / exact.m.max():.3f}")


if __name__ == "__main__":
    main()
