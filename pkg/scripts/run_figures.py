"""Regenerate the desk-scale figure artifacts under ``out/``.

    python3 scripts/run_figures.py              # fig1 fig2 fig3 fig4
    python3 scripts/run_figures.py fig5 --out /tmp/figs
"""

import argparse
import sys
import time

from helmpseudo import cli


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("figures", nargs="*", default=["fig1", "fig2", "fig3", "fig4"], choices=cli.FIGURES)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()
    worst = 0
    for fig in args.figures:
        t = time.perf_counter()
        code = cli.main(["reproduce", fig, "--out", args.out])
        print(f"{fig}: exit {code} in {time.perf_counter() - t:.1f}s", file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
