"""Spread of the Moran occupancy TV distance over seeds, as a function of run length.

At N=100, s=0.05, u=0.02, nu1=0.99 most stationary mass sits at k=N, which
the chain leaves at rate u*nu0*N = 0.02, so the TV estimate converges slowly.
"""
import argparse

import numpy as np

from ancline import FiniteParams, SimConfig, moran_stationary, simulate_moran
from ancline.simulate import total_variation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--events", type=float, nargs="+", default=[1e6, 4e6, 1.6e7])
    args = ap.parse_args()
    p = FiniteParams.from_nu1(100, 0.05, 0.02, 0.99)
    pi = moran_stationary(p)
    print(f"pi[N] = {pi[-1]:.3f}")
    for ev in args.events:
        tv = np.array([
            total_variation(simulate_moran(p, SimConfig(seed=k, events=int(ev))).value, pi) for k in range(args.seeds)
        ])
        print(f"events {ev:9.3g}  TV mean {tv.mean():.4f}  min {tv.min():.4f}  max {tv.max():.4f}")


if __name__ == "__main__":
    main()
