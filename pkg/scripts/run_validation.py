"""Oracle-versus-solver validation on a few parameter sets; prints one line per check."""
import argparse

from ancline import FiniteParams, validate_suite
from ancline.experiments import ValidationConfig

CASES = {
    "neutral": FiniteParams.from_nu1(50, 0.0, 0.02, 0.9),
    "selected": FiniteParams.from_nu1(50, 0.05, 0.02, 0.9),
    "strong": FiniteParams.from_nu1(50, 0.5, 0.1, 0.5),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--events", type=float, default=1e6)
    args = ap.parse_args()
    vc = ValidationConfig(seed=args.seed, moran_events=int(args.events), line_events=int(args.events))
    bad = 0
    for label, p in CASES.items():
        rep = validate_suite("finite", p, vc)
        for c in rep.checks:
            print(f"{label:9s} {'ok  ' if c.passed else 'FAIL'} {c.name:32s} {c.analytic:.6g} {c.simulated:.6g} ({c.rule})")
        bad += len(rep.failures())
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
