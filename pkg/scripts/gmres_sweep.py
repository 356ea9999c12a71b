"""GMRES iteration counts for the shifted-Laplace preconditioned system."""

import argparse
import math

from helmpseudo import cli, theory


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=int, default=4)
    ap.add_argument("--kappas", default="4pi,8pi,16pi")
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--maxiter", type=int, default=1000)
    args = ap.parse_args()
    kappas = [cli.parse_kappa(k) for k in args.kappas.split(",")]
    rows = cli.gmres_sweep(args.level, kappas, ("halfk", "halfk2"), args.tol, args.maxiter)
    for rule in ("halfk", "halfk2"):
        sel = [r for r in rows if r["sigma_rule"] == rule]
        C = theory.calibrate_sl_constant(sel[0]["kappa"], args.tol, sel[0]["iterations"])
        for r in sel:
            est = theory.iterations_estimate("sl", args.tol, kappa=r["kappa"], C=C).N
            print(f"{rule:7} kappa={r['kappa'] / math.pi:5.1f}pi iterations={r['iterations']:4d} "
                  f"estimate={est:4d} converged={r['converged']} ({r['seconds']:.1f}s)")


if __name__ == "__main__":
    main()
