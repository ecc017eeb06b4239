"""Finite element convergence table for the ball and a spherical shell.

Prints, for each mesh size, the lowest distinct eigenvalues, their relative
errors against the exact spectrum, and observed orders between successive
sizes.

    python scripts/convergence_study.py --h 0.08,0.04,0.02 --eps 0.5
"""
import argparse
import csv
import math
import sys

from steklov import exact
from steklov.fem import full_spectrum
from steklov.geometry import make_profile
from steklov.mesh import MeshParams, generate_mesh


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", default="0.08,0.04,0.02", help="comma-separated mesh sizes, coarse to fine")
    ap.add_argument("--eps", type=float, default=0.5, help="inner radius of the shell")
    ap.add_argument("--count", type=int, default=4, help="distinct eigenvalues to track")
    args = ap.parse_args(argv)
    sizes = [float(h) for h in args.h.split(",")]

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["domain", "h", "index", "value", "exact", "rel_error", "order"])
    for kind in ("ball", "annulus"):
        prof = make_profile(kind, args.eps) if kind == "annulus" else make_profile(kind)
        ref = (exact.annulus_spectrum(3, args.eps, args.count) if kind == "annulus"
               else exact.ball_spectrum(3, args.count)).values[: args.count]
        prev = None
        for h in sizes:
            spec = full_spectrum(generate_mesh(prof, MeshParams(h)), args.count + 2, args.count)
            errs = [abs(v - r) / r if r else abs(v) for v, r in zip(spec.values, ref)]
            for j, (v, r, e) in enumerate(zip(spec.values, ref, errs)):
                order = math.log2(prev[j] / e) if prev and r and e > 0 else ""
                out.writerow([kind, h, j, f"{v:.12g}", f"{r:.12g}", f"{e:.3e}",
                              f"{order:.3f}" if order != "" else ""])
            prev = errs
    return 0


if __name__ == "__main__":
    sys.exit(main())
