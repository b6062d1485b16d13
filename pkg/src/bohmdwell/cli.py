"""Command line: simulate | dwell | trajectories | benchmark | validate."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import observables as obs
from .config import load_config
from .errors import BohmDwellError, InvariantError
from .runner import ScenarioRun, benchmark, emission_checks, invariant_suite, run_scenario

log = logging.getLogger("bohmdwell")


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return f"{float(v):.17g}"


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _out_dir(args, cfg) -> Path:
    return Path(args.out or cfg.output.dir)


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "threads", None):
        cfg.trajectories.threads = args.threads
    if getattr(args, "seed", None) is not None:
        cfg.trajectories.seed = args.seed
    return cfg.validate()


def _units(cfg):
    u = cfg.units
    if u.v0_ev is None:
        return None
    t_fs, x_ang = obs.unit_scales(u.v0_ev, u.m_eff_ratio)
    return {"v0_ev": u.v0_ev, "m_eff_ratio": u.m_eff_ratio, "t_unit_fs": t_fs, "x_unit_angstrom": x_ang}


def cmd_simulate(args) -> int:
    cfg = _load(args)
    run = run_scenario(cfg)
    emission_checks(run)
    out = _out_dir(args, cfg)
    o = cfg.output
    x = run.grid.x[::o.density_stride_x]
    rows = []
    for k in range(0, len(run.snapshots), o.density_stride_t):
        rho = np.abs(run.snapshots.psi[k, ::o.density_stride_x]) ** 2
        t = run.snapshots.times[k]
        rows.extend((t, xi, ri) for xi, ri in zip(x, rho))
    write_csv(out / "density.csv", ["t", "x", "rho"], rows)
    fl = run.flux
    j_a, j_b, f_a, f_b = fl.j_at(run.a), fl.j_at(run.b), fl.f_at(run.a), fl.f_at(run.b)
    write_csv(out / "flux.csv", ["t", "j_a", "j_b", "f_a", "f_b", "T2_line"],
              ((fl.times[k], j_a[k], j_b[k], f_a[k], f_b[k], run.T2) for k in range(len(fl.times))))
    print(f"|T|^2 = {run.T2:.6f}; wrote {out / 'density.csv'}, {out / 'flux.csv'}")
    return 0


def _report_header(run: ScenarioRun) -> dict:
    return {
        "scenario": run.cfg.name,
        "config": run.cfg.as_dict(),
        "T2": run.T2,
        "settle_time": run.settle_time,
        "propagation_seconds": run.propagation_seconds,
        "packet_choice": {"x0": run.cfg.packet.x0, "sigma_x": run.cfg.packet.sigma_x},
        "units": _units(run.cfg),
    }


def cmd_dwell(args) -> int:
    cfg = _load(args)
    run = run_scenario(cfg, keep_snapshots=True)
    emission_checks(run)
    out = _out_dir(args, cfg)
    c = run.curves()
    if np.any(np.abs(c.tau_T + c.tau_R - c.tau_D) > 1e-10 * np.maximum(np.abs(c.tau_D), 1e-300)):
        raise InvariantError("sum rule violated in dwell curves")
    write_csv(out / "dwell_curves.csv", ["s", "tau_T", "tau_R", "tau_D", "tau_T_cond", "tau_R_cond"],
              zip(c.s, c.tau_T, c.tau_R, c.tau_D, c.tau_T_cond, c.tau_R_cond))
    report = _report_header(run)
    formula = run.formula()
    report["formula"] = formula.as_dict()
    report["density_dwell_time"] = obs.average_dwell_time(run.snapshots, run.a, run.b, *run.window)
    if args.oracle:
        tr_rep, _ = run.oracle()
        report["trajectories"] = tr_rep.as_dict()
        report["relative_gap"] = {
            "tau_T": (tr_rep.tau_T - formula.tau_T) / formula.tau_D,
            "tau_R": (tr_rep.tau_R - formula.tau_R) / formula.tau_D,
        }
    units = report["units"]
    if units:
        report["formula_fs"] = {k: getattr(formula, k) * units["t_unit_fs"]
                                for k in ("tau_T", "tau_R", "tau_D", "tau_T_cond", "tau_R_cond")}
    (out / "report.json").write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    print(f"|T|^2 = {run.T2:.6f}  tau_T = {formula.tau_T:.6f}  tau_R = {formula.tau_R:.6f}  "
          f"tau_D = {formula.tau_D:.6f}")
    if args.oracle:
        g = report["relative_gap"]
        print(f"trajectories: tau_T = {tr_rep.tau_T:.6f}  tau_R = {tr_rep.tau_R:.6f}  "
              f"gap/tau_D = {g['tau_T']:+.2e}, {g['tau_R']:+.2e}")
    if units:
        print(f"t_unit = {units['t_unit_fs']:.4f} fs, x_unit = {units['x_unit_angstrom']:.3f} A")
    return 0


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def cmd_trajectories(args) -> int:
    cfg = _load(args)
    run = run_scenario(cfg, keep_snapshots=True)
    emission_checks(run)
    rep, ens = run.oracle()
    out = _out_dir(args, cfg)
    stride = cfg.output.trajectory_stride
    labels = np.where(ens.transmitted, "Transmitted", "Reflected")
    ks = range(0, len(ens.times), stride)

    def rows():
        for i in range(len(ens)):
            for k in ks:
                yield i, ens.times[k], ens.paths[k, i], labels[i]

    write_csv(out / "trajectories.csv", ["trajectory_id", "t", "x", "label"], rows())
    print(f"{len(ens)} trajectories, {int(ens.transmitted.sum())} transmitted, "
          f"x_c = {ens.x_c:.6f}, casualties: {len(ens.casualties)}")
    return 0


def cmd_benchmark(args) -> int:
    """Post-propagation cost of the flux formulas vs. the trajectory oracle."""
    cfg = _load(args)
    run = run_scenario(cfg, keep_snapshots=True)
    emission_checks(run)
    threads = cfg.trajectories.threads if cfg.trajectories.threads > 1 else (os.cpu_count() or 1)
    rows, ratio = benchmark(run, threads)
    out = _out_dir(args, cfg)
    write_csv(out / "benchmark.csv", ["method", "wall_seconds", "tau_T", "tau_R", "storage_bytes"], rows)
    secs = {r[0]: r[1] for r in rows}
    print(f"N = {cfg.trajectories.n}: formula {secs['formula']:.3e} s, trajectories serial "
          f"{secs['trajectories_serial']:.3f} s, parallel({threads}) "
          f"{rows[3][1]:.3f} s, shared propagation {run.propagation_seconds:.3f} s")
    print(f"ratio formula/serial = {ratio:.3e}; storage: flux {run.flux.nbytes} B vs "
          f"snapshots {run.snapshots.nbytes} B")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    run = run_scenario(cfg, keep_snapshots=True)
    results = invariant_suite(run, oracle=args.oracle)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:24s} {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "dwell": cmd_dwell,
    "trajectories": cmd_trajectories,
    "benchmark": cmd_benchmark,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bohmdwell",
                                description="Bohmian transmission/reflection dwell times in 1D scattering")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        s = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else None)
        s.add_argument("--config", help="scenario file (default: shipped double-barrier scenario)")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--oracle", action="store_true", help="also run the trajectory oracle")
        s.add_argument("--threads", type=int, help="threads for trajectory integration")
        s.add_argument("--seed", type=int, help="seed for the random sampling scheme")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except BohmDwellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
