"""Run every experiment driver, write reports, and print the verdict summary.

    python scripts/run_experiments.py --out runs
    python scripts/run_experiments.py --skip-tube   # exact-formula drivers only, about a second
"""
import argparse
import sys
import time

from steklov import experiments


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs", help="report directory (default: runs)")
    ap.add_argument("--eps", type=float, default=0.2, help="shell radius for the tube experiments")
    ap.add_argument("--delta", default="0.02,0.01,0.005", help="comma-separated tube radii")
    ap.add_argument("--h", type=float, default=0.03, help="bulk mesh size for tube domains")
    ap.add_argument("--skip-tube", action="store_true", help="skip the finite element tube experiments")
    args = ap.parse_args(argv)
    deltas = tuple(float(d) for d in args.delta.split(","))

    reports = [
        experiments.run_asymptotic_validation(),
        experiments.run_normalized_comparison(),
        experiments.run_annulus_optimizer(3),
    ]
    if not args.skip_tube:
        cfg = experiments.TubeMeshConfig(h=args.h)
        started = time.perf_counter()
        reports.append(experiments.run_tube_limit(args.eps, deltas, cfg))
        reports.append(experiments.run_neck_concentration(args.eps, deltas, cfg))
        print(f"tube experiments: {time.perf_counter() - started:.0f} s", file=sys.stderr)
    reports.append(experiments.run_bound_audit(reports, (3, 4, 5, 6)))

    for rep in reports:
        print(f"wrote {rep.write(args.out)}", file=sys.stderr)
    return 0 if experiments.summary(reports) else 1


if __name__ == "__main__":
    sys.exit(main())
