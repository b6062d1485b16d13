"""Scenario pipeline shared by the CLI subcommands and the test suite."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import observables as obs
from . import trajectories as traj
from .config import ScenarioConfig
from .errors import InvariantError
from .numerics import Snapshots, energy, gaussian_packet
from .propagation import propagate_and_record


@dataclass
class ScenarioRun:
    cfg: ScenarioConfig
    grid: object
    potential: object
    wf0: object
    snapshots: Snapshots
    flux: obs.FluxSeries
    T2: float
    settle_time: float | None
    propagation_seconds: float
    _oracle: dict = field(default_factory=dict, repr=False)

    @property
    def a(self) -> float:
        return self.cfg.probes[0]

    @property
    def b(self) -> float:
        return self.cfg.probes[1]

    @property
    def window(self) -> tuple[float, float]:
        return self.cfg.tau_window

    @property
    def final(self):
        return self.snapshots[-1]

    def formula(self, tau_i=None, tau_f=None) -> obs.DwellTimeReport:
        ti, tf = self.window
        return obs.formula_report(
            self.flux, self.a, self.b, ti if tau_i is None else tau_i,
            tf if tau_f is None else tau_f, self.cfg.settle_window(),
            self.cfg.window.settle_tol)

    def curves(self, s_values=None, with_density=False) -> obs.DwellCurves:
        ti, tf = self.window
        if s_values is None:
            s_values = curve_points(self.flux.times, ti, tf, self.cfg.output.curve_stride)
        snaps = self.snapshots if with_density else None
        return obs.dwell_time_curves(self.flux.times, self.flux.f_at(self.a), self.flux.f_at(self.b),
                                     self.T2, ti, s_values, snaps, self.a, self.b)

    def oracle(self, n=None, threads=None, seed=None, scheme=None):
        t = self.cfg.trajectories
        key = (n or t.n, threads or t.threads, t.seed if seed is None else seed, scheme or t.scheme)
        if key not in self._oracle:
            ti, tf = self.window
            self._oracle[key] = traj.ensemble_times(
                self.snapshots, self.wf0, self.T2, self.a, self.b, ti, tf, N=key[0],
                scheme=key[3], seed=key[2], threads=key[1], chunk=t.chunk,
                rho_floor_rel=t.rho_floor_rel, v_cap_factor=t.v_cap_factor,
                tol=t.step_tol, max_loss=t.max_loss)
        return self._oracle[key]


def curve_points(times, tau_i, tau_f, stride):
    """Every `stride`-th sample time in [tau_i, tau_f], always ending at tau_f."""
    t = times[(times >= tau_i - 1e-12) & (times <= tau_f + 1e-12)][::stride]
    if not len(t) or t[-1] < tau_f:
        t = np.append(t, tau_f)
    return t


def run_scenario(cfg: ScenarioConfig, keep_snapshots: bool = True) -> ScenarioRun:
    """Propagate the configured packet and read off |T|^2 from the flux at b."""
    cfg.validate()
    grid = cfg.make_grid()
    potential = cfg.make_potential()
    wf0 = gaussian_packet(cfg.make_packet(), grid, cfg.packet.max_negative_mass)
    w = cfg.window
    start = time.perf_counter()
    snapshots, flux = propagate_and_record(
        wf0, potential, grid, cfg.probes,
        keep_every=cfg.trajectories.keep_every if keep_snapshots else None,
        boundary_tol=w.boundary_tol, lower_limit_tol=w.lower_limit_tol)
    seconds = time.perf_counter() - start
    b = cfg.probes[1]
    T2 = obs.transmission_probability(flux, cfg.settle_window(), q=b, tol=w.settle_tol,
                                      final_wf=snapshots[-1], crosscheck_tol=w.crosscheck_tol)
    k = obs.settle_index(flux.j_at(b), cfg.settle_window(), w.settle_tol)
    settle = float(flux.times[k]) if k is not None else None
    return ScenarioRun(cfg, grid, potential, wf0, snapshots, flux, T2, settle, seconds)


def best_time(fn, repeat=5):
    """Smallest wall time of `repeat` calls, and the last result."""
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def benchmark(run: ScenarioRun, threads: int = 1, repeat: int = 5):
    """Post-propagation cost of the flux formulas vs. the trajectory oracle.

    Propagation is shared and reported on its own row. The formula path
    needs only the edge-flux series; the oracle needs the snapshot history.
    Returns (rows, ratio) with rows (method, wall_seconds, tau_T, tau_R,
    storage_bytes) and ratio = formula time / serial trajectory time.
    """
    formula_s, formula = best_time(run.formula, repeat)
    serial, _ = run.oracle(threads=1)
    parallel, _ = run.oracle(threads=threads)
    snap_bytes = run.snapshots.nbytes
    rows = [
        ("propagation_shared", run.propagation_seconds, None, None, snap_bytes),
        ("formula", formula_s, formula.tau_T, formula.tau_R, run.flux.nbytes),
        ("trajectories_serial", serial.wall_time, serial.tau_T, serial.tau_R, snap_bytes),
        (f"trajectories_parallel_{threads}", parallel.wall_time, parallel.tau_T, parallel.tau_R,
         snap_bytes),
    ]
    return rows, formula_s / serial.wall_time


def flux_identity_error(run: ScenarioRun) -> float:
    return float(np.max(np.abs(run.flux.f - run.flux.mass)))


def emission_checks(run: ScenarioRun) -> None:
    """Re-assert the flux invariants before anything is written out."""
    w = run.cfg.window
    delta = 1e-3
    if np.any(run.flux.f < -delta) or np.any(run.flux.f > 1 + delta):
        raise InvariantError(f"integrated flux leaves [-{delta}, 1+{delta}]")
    err = flux_identity_error(run)
    if err > w.identity_tol:
        raise InvariantError(f"flux-density identity violated: max |f_q - right mass| = "
                             f"{err:.3e} > {w.identity_tol:g}")
    if not -delta <= run.T2 <= 1 + delta:
        raise InvariantError(f"|T|^2 = {run.T2} outside [-{delta}, 1+{delta}]")


def invariant_suite(run: ScenarioRun, oracle: bool = False):
    """Named checks as (name, passed, detail) tuples."""
    out = []

    def check(name, passed, detail):
        out.append((name, bool(passed), detail))

    w = run.cfg.window
    snaps = run.snapshots
    ti, tf = run.window
    n0, n1 = run.wf0.norm(), run.final.norm()
    check("unitarity", abs(n1 - n0) < 1e-8, f"norm drift {abs(n1 - n0):.2e} (< 1e-8)")
    e0, e1 = energy(run.wf0, run.potential), energy(run.final, run.potential)
    check("energy", abs(e1 - e0) <= 1e-6 * abs(e0), f"relative <H> drift {abs(e1 - e0) / abs(e0):.2e} (<= 1e-6)")
    err = flux_identity_error(run)
    check("flux_density_identity", err <= w.identity_tol, f"max |f_q - right mass| {err:.2e} (<= {w.identity_tol:g})")
    f = run.flux.f
    check("flux_range", f.min() >= -1e-3 and f.max() <= 1 + 1e-3, f"f in [{f.min():.4f}, {f.max():.4f}]")
    rm = obs.right_mass(run.final, run.b)
    check("T2_crosscheck", abs(rm - run.T2) <= w.crosscheck_tol, f"|T|^2 flux {run.T2:.6f} vs density {rm:.6f}")

    worst = 0.0
    for frac in ((0.0, 1.0), (0.0, 0.25), (0.1, 0.5), (0.5, 1.0), (0.3, 0.31)):
        a_, b_ = ti + frac[0] * (tf - ti), ti + frac[1] * (tf - ti)
        r = run.formula(a_, b_)
        if r.tau_D:
            worst = max(worst, abs(r.tau_T + r.tau_R - r.tau_D) / abs(r.tau_D))
    check("sum_rule", worst <= 1e-10, f"max relative |tau_T + tau_R - tau_D| {worst:.1e} (<= 1e-10)")

    rep = run.formula()
    span = tf - ti
    check("bounds", all(-1e-9 <= t <= span for t in (rep.tau_T, rep.tau_R)),
          f"tau_T {rep.tau_T:.4f}, tau_R {rep.tau_R:.4f} within [0, {span:g}]")
    c = run.curves()
    mono = min(np.diff(c.tau_T).min(), np.diff(c.tau_R).min(), np.diff(c.tau_D).min()) if len(c.s) > 1 else 0.0
    slack = 1e-6 * max(1.0, float(np.max(np.diff(c.s))) if len(c.s) > 1 else 1.0)
    check("monotone_curves", mono >= -slack, f"smallest curve increment {mono:.2e}")

    f_a, f_b = run.flux.f_at(run.a), run.flux.f_at(run.b)
    if np.all(f_b <= run.T2):
        times = run.flux.times
        dT = abs(obs.transmission_time(times, f_a, f_b, run.T2, ti, tf)
                 - obs.oriols_transmission_time(times, f_a, f_b, run.T2, ti, tf))
        dR = abs(obs.reflection_time(times, f_a, f_b, run.T2, ti, tf)
                 - obs.oriols_reflection_time(times, f_a, f_b, run.T2, ti, tf))
        check("oriols_reduction", max(dT, dR) <= 1e-12, f"max difference {max(dT, dR):.1e}")
    else:
        check("oriols_reduction", True, "not applicable: j(., b) changes sign")

    if oracle:
        tr_rep, ens = run.oracle()
        tol = run.cfg.trajectories.oracle_tol
        gT = abs(tr_rep.tau_T - rep.tau_T) / rep.tau_D
        gR = abs(tr_rep.tau_R - rep.tau_R) / rep.tau_D
        check("oracle_equivalence", max(gT, gR) <= tol,
              f"|dtau_T|/tau_D {gT:.2e}, |dtau_R|/tau_D {gR:.2e} (<= {tol:g})")
        nc = traj.no_crossing_violation(ens)
        check("no_crossing", nc <= run.grid.dx, f"largest order inversion {nc:.2e} (<= dx)")
        if 0 < run.T2 < 1:
            t = run.cfg.trajectories
            dev = traj.critical_mass_deviation(snaps, ens.x_c, run.T2, rho_floor_rel=t.rho_floor_rel,
                                               tol=t.step_tol)
            check("critical_trajectory", dev <= 0.01, f"max |right mass - |T|^2| {dev:.2e} (<= 0.01)")
    return out
