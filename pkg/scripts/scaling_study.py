"""Convergence of the fitted slope and recovered coefficient under refinement.

For one scenario, repeat the sweep at several quadrature resolutions and
schedule lengths and report slope, gamma spread and coefficient error.

    python scripts/scaling_study.py --scenario log-laplace-2d --r 2
"""

import argparse

import numpy as np

from remova.conv import Problem, Quadrature
from remova.criterion import decide
from remova.mollify import EpsilonSchedule
from remova.scenarios import lookup


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="log-laplace-2d")
    ap.add_argument("--r", default="inf")
    ap.add_argument("--nodes", nargs="+", type=int, default=[8, 16, 32])
    ap.add_argument("--counts", nargs="+", type=int, default=[6, 10])
    args = ap.parse_args(argv)

    s = lookup(args.scenario)
    print("nodes_per_eps count verdict        slope      gamma_spread coef_rel_err")
    for nodes in args.nodes:
        prob = Problem(s.u, s.P, quad=Quadrature(nodes_per_eps=nodes), name=s.name)
        for count in args.counts:
            v = decide(prob, EpsilonSchedule(count=count), args.r)
            g = np.array([rec.gamma for rec in v.records])
            spread = g.max() / g.min() - 1 if g.min() > 0 else float("nan")
            err = float("nan")
            if not v.removable and hasattr(v, "delta"):
                err = max(abs(v.delta.coefficient(b) - c) / abs(c) for b, c in s.expected.coefficients.items())
            slope = getattr(v, "fit", None)
            slope = float("nan") if slope is None else slope.slope
            print(f"{nodes:13d} {count:5d} {v.kind:14s} {slope:10.6f} {spread:12.3e} {err:12.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
