"""Run the shipped double-barrier scenario end to end and print a summary.

Writes density/flux/dwell-curve CSVs and report.json (with the trajectory
oracle) into --out, exactly as `bohmdwell simulate` + `bohmdwell dwell --oracle`.
"""
import argparse
import sys

from bohmdwell.cli import main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=None, help="scenario file (default: shipped double barrier)")
    p.add_argument("--out", default="out/double_barrier")
    p.add_argument("--no-oracle", action="store_true")
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    common = ["--out", args.out] + (["--config", args.config] if args.config else [])
    code = main(["simulate", *common])
    if code == 0:
        code = main(["dwell", *common] + ([] if args.no_oracle else ["--oracle"]))
    sys.exit(code)
