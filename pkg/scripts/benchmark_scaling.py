"""Oracle wall time against N, next to the (N-independent) formula cost."""
import argparse
import csv
from pathlib import Path

import numpy as np

from bohmdwell import load_config, run_scenario
from bohmdwell.runner import best_time


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, nargs="+", default=[125, 250, 500, 1000, 2000])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="out/benchmark_scaling.csv")
    args = p.parse_args()

    run = run_scenario(load_config(args.config))
    formula_s, _ = best_time(run.formula)
    print(f"propagation {run.propagation_seconds:.2f} s (shared), formula {formula_s:.2e} s")
    rows = []
    for n in args.n:
        rep, _ = run.oracle(n=n, threads=args.threads)
        rows.append((n, rep.wall_time, formula_s / rep.wall_time))
        print(f"N = {n:5d}: oracle {rep.wall_time:8.2f} s, ratio {formula_s / rep.wall_time:.2e}")
    n, t = np.array([r[0] for r in rows], float), np.array([r[1] for r in rows])
    slope = np.polyfit(np.log(n), np.log(t), 1)[0]
    print(f"log-log slope of oracle time vs N: {slope:.2f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "oracle_seconds", "ratio"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
