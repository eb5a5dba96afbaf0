"""Regenerate every figure's CSV curves through the cv2x command line.

    python3 scripts/reproduce_figures.py --out results/        # analytic only, seconds
    python3 scripts/reproduce_figures.py --out results/ --mc   # adds Monte-Carlo columns, ~10 min
"""

import argparse
import os
import sys

from cv2x.cli import main as cv2x

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# (config, command, extra curves as --set overrides)
RUNS = [
    ("fig5", "coverage", [[]]),
    ("fig6", "coverage", [[], ["network.lambda_2_per_km=5"]]),
    ("fig7", "coverage", [[f"bias.b1_db={b}"] for b in (0, 5, 10, 15)]),
    ("fig8", "load", [[]]),
    ("fig9", "rate", [[]]),
    ("fig10", "rate", [[f"network.lambda_1_per_km2={v}"] for v in (0.25, 0.5, 1)]),
    ("fig11", "rate", [[]]),
]


def _tag(sets):
    parts = []
    for s in sets:
        key, val = s.split("=", 1)
        parts.append(key.split(".")[-1] + val.replace(".", "p"))
    return "".join("_" + p for p in parts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--mc", action="store_true", help="also run the simulator")
    ap.add_argument("--trials", type=int)
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    status = 0
    for name, cmd, variants in RUNS:
        for sets in variants:
            out = os.path.join(args.out, f"{name}{_tag(sets)}.csv")
            argv = [cmd, "--config", os.path.join(ROOT, "configs", f"{name}.toml"), "--out", out,
                    "--mode", "validate" if args.mc else "analytic"]
            for s in sets:
                argv += ["--set", s]
            if args.trials:
                argv += ["--trials", str(args.trials)]
            rc = cv2x(argv)
            print(f"{out}: exit {rc}")
            status = max(status, rc)
    return status


if __name__ == "__main__":
    sys.exit(main())
