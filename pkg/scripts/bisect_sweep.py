"""Closest real point of the shifted-Laplace level set versus kappa/(kappa+sigma).

Prints one row per (rule, kappa) plus a one-point calibrated misfit per rule.
"""

import argparse
import math

from helmpseudo import cli, theory


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=int, default=3)
    ap.add_argument("--kappas", default="4pi,8pi,16pi")
    ap.add_argument("--target", type=float, default=2e-2)
    args = ap.parse_args()
    kappas = [cli.parse_kappa(k) for k in args.kappas.split(",")]
    rows = cli.bisect_sweep(args.level, kappas, ("halfk", "halfk2"), args.target)
    print(f"{'rule':8} {'kappa/pi':>8} {'x':>10} {'k/(k+s)':>10} {'excl. radius':>12}")
    for r in rows:
        rad = theory.sl_exclusion(r["kappa"], r["sigma"], args.target).radius
        print(f"{r['sigma_rule']:8} {r['kappa'] / math.pi:8.1f} {r['x']:10.4f} {r['prediction']:10.4f} {rad:12.4f}")
    for rule in ("halfk", "halfk2"):
        sel = [r for r in rows if r["sigma_rule"] == rule]
        c = sel[0]["x"] / sel[0]["prediction"]
        misfit = max(abs(c * r["prediction"] - r["x"]) / r["x"] for r in sel)
        print(f"{rule}: scale {c:.3f}, max relative misfit {misfit:.1%}")


if __name__ == "__main__":
    main()
