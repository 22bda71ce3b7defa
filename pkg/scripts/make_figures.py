"""Write CSV and SVG for every named figure into an output directory."""
import argparse
from pathlib import Path

from ancline.experiments import FIGURES, run_figure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in FIGURES:
        fig = run_figure(name, jobs=args.jobs)
        for fmt in ("csv", "svg"):
            path = args.out / f"{name}.{fmt}"
            path.write_text(fig.render(fmt))
            print(path)


if __name__ == "__main__":
    main()
