"""Loss ratio of the lossy buffer as the arrival rate at its input grows.

Prints one row per grid point, with the merged and unmerged chains side
by side, and optionally writes both sweeps as CSV.
"""

import argparse
from pathlib import Path

from stochreo import analysis as AN
from stochreo.dsl import default_loss_metric, load

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--file", default=str(ROOT / "connectors" / "lossyfifo1.reo"))
    ap.add_argument("--vary", default="a")
    ap.add_argument("--lo", type=float, default=0.1)
    ap.add_argument("--hi", type=float, default=20.0)
    ap.add_argument("--steps", type=int, default=25)
    ap.add_argument("--csv", help="prefix for <prefix>-merged.csv and <prefix>-plain.csv")
    args = ap.parse_args()

    spec, S = load(args.file)
    metric = AN.LossProbability(*default_loss_metric(spec))
    grid = AN.log_grid(args.lo, args.hi, args.steps)
    merged = AN.sweep(S, args.vary, grid, metric, merge=True)
    plain = AN.sweep(S, args.vary, grid, metric, merge=False)

    print(f"{args.vary:>10} {'merged':>10} {'unmerged':>10}")
    for m, p in zip(merged, plain):
        print(f"{m.value:10.4g} {m.metric:10.5f} {p.metric:10.5f}")
    for name, rows in (("merged", merged), ("unmerged", plain)):
        values = [r.metric for r in rows]
        monotone = all(y >= x - 1e-12 for x, y in zip(values, values[1:]))
        print(f"{name}: nondecreasing={monotone} range=[{values[0]:.5f}, {values[-1]:.5f}]")
    if args.csv:
        Path(f"{args.csv}-merged.csv").write_text(AN.sweep_csv(merged), encoding="utf-8")
        Path(f"{args.csv}-plain.csv").write_text(AN.sweep_csv(plain), encoding="utf-8")


if __name__ == "__main__":
    main()
