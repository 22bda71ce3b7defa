"""Pedigree versus ancestral-line mutation flux for a population that is 90% fit.

Finds s such that the unfit sampling probability b1 equals ``--b1`` and
reports the mutation flux seen along the ancestral line against the
pedigree flux ``--total-rate``.
"""
import argparse

from ancline import FiniteParams, compare_fluxes, find_s_for_b1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=10_000)
    ap.add_argument("--u", type=float, default=8e-4)
    ap.add_argument("--nu1", type=float, default=0.99)
    ap.add_argument("--b1", type=float, default=0.1)
    ap.add_argument("--total-rate", type=float, default=1.6e-3)
    args = ap.parse_args()

    base = FiniteParams.from_nu1(args.N, 0.0, args.u, args.nu1)
    s = find_s_for_b1(base, args.b1)
    c = compare_fluxes(base.with_s(s), args.total_rate)
    print(f"s*            {s:.6g}")
    print(f"b1            {c.b1:.6g}")
    print(f"P(A=1)        {c.p1:.6g}")
    print(f"q10, q01      {c.q10:.6g}, {c.q01:.6g}")
    print(f"pedigree flux {c.pedigree_flux:.6g}")
    print(f"phylo flux    {c.phylo_flux:.6g}")
    print(f"ratio         {c.ratio:.4f}")


if __name__ == "__main__":
    main()
