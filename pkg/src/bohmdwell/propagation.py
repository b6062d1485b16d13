"""Time loop: propagate a packet and record probe fluxes and snapshots."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import AsymptoticsError, ConfigError, NumericGuardError
from .numerics import CrankNicolson, PiecewisePotential, SimulationGrid, Snapshots, WaveFunction
from .observables import FluxSeries, ProbeCurrents, cumulative_flux, right_mass


def propagate_and_record(wf0: WaveFunction, potential: PiecewisePotential,
                         grid: SimulationGrid | None = None,
                         probes: Sequence[float] = (),
                         keep_every: int | None = 1,
                         boundary_tol: float = 1e-6,
                         lower_limit_tol: float = 1e-6,
                         record_mass: bool = True) -> tuple[Snapshots, FluxSeries]:
    """Run grid.n_steps Crank-Nicolson steps, recording probe currents every step.

    Snapshots are kept every `keep_every` steps; the initial and final states
    are always kept, and `keep_every=None` keeps only those two. The running
    flux integrals start at zero, which stands in for the -inf lower limit, so
    each probe must see right-mass below `lower_limit_tol` initially.
    """
    grid = grid or wf0.grid
    if grid != wf0.grid:
        raise ConfigError("wave function grid differs from propagation grid")
    for q in probes:
        if not grid.contains(q):
            raise ConfigError(f"probe {q} outside grid [{grid.x_min}, {grid.x_max}]")
        m = right_mass(wf0, q)
        if m >= lower_limit_tol:
            raise AsymptoticsError(
                f"initial packet already has mass {m:.3e} right of probe q={q}; "
                f"a zero lower flux limit needs < {lower_limit_tol:.1e}")
    if keep_every is not None and keep_every < 1:
        raise ConfigError(f"keep_every={keep_every} must be >= 1")

    cn = CrankNicolson(grid, potential)
    currents = ProbeCurrents(grid, probes)
    n = grid.n_steps
    times = grid.t_start + grid.dt * np.arange(n + 1)
    j = np.empty((len(probes), n + 1))
    mass = np.empty((len(probes), n + 1)) if record_mass else None

    keep = list(range(0, n + 1, keep_every)) if keep_every else [0]
    if keep[-1] != n:
        keep.append(n)
    snaps = np.empty((len(keep), grid.n_points), dtype=complex)

    psi = np.array(wf0.values)
    slot = 0
    for k in range(n + 1):
        if k:
            psi = cn.advance(psi)
        b = max(abs(psi[0]), abs(psi[-1]))
        if b >= boundary_tol:
            raise NumericGuardError(
                f"wave function reached the domain boundary at t={times[k]:.6g}: "
                f"|Psi|={b:.3e} >= {boundary_tol:.1e}; enlarge the grid or shorten the run")
        j[:, k] = currents(psi)
        if record_mass:
            mass[:, k] = currents.right_masses(np.abs(psi) ** 2)
        if slot < len(keep) and keep[slot] == k:
            snaps[slot] = psi
            slot += 1

    f = np.array([cumulative_flux(jq, times) for jq in j]).reshape(j.shape)
    snapshots = Snapshots(grid, times[keep], snaps)
    return snapshots, FluxSeries(times, tuple(float(q) for q in probes), j, f, mass)
