"""Densities, currents, integrated fluxes and dwell-time functionals.

Transmission and reflection times come straight from the integrated edge
fluxes f_a, f_b and the transmission probability:

    tau_T = int [min(f_a, T2) - min(f_b, T2)] dt
    tau_R = int [max(f_a, T2) - max(f_b, T2)] dt

All quadratures are trapezoidal, in space and in time.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import constants
from scipy.integrate import cumulative_trapezoid

from .errors import AsymptoticsError, InvariantError
from .numerics import CURRENT_SCALE, SimulationGrid, Snapshots, WaveFunction

COND_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class FluxSeries:
    """Probe currents j(t_k, q), their running integrals f_q(t_k) and, when
    recorded, the right-of-probe mass from the density at the same times."""

    times: np.ndarray
    probes: tuple[float, ...]
    j: np.ndarray
    f: np.ndarray
    mass: np.ndarray | None = field(default=None, repr=False)

    def index(self, q: float) -> int:
        for i, p in enumerate(self.probes):
            if np.isclose(p, q, rtol=0, atol=1e-12):
                return i
        raise KeyError(f"no probe at q={q}; probes are {self.probes}")

    def j_at(self, q):
        return self.j[self.index(q)]

    def f_at(self, q):
        return self.f[self.index(q)]

    @property
    def nbytes(self) -> int:
        n = self.times.nbytes + self.j.nbytes + self.f.nbytes
        return int(n + (self.mass.nbytes if self.mass is not None else 0))


class ProbeCurrents:
    """Central-difference nodal currents, linearly interpolated to probes
    that fall between nodes."""

    def __init__(self, grid: SimulationGrid, probes: Sequence[float]):
        self.grid = grid
        self.dx = grid.dx
        self.n = grid.n_points
        loc = [grid.locate(q) for q in probes]
        self.i = np.array([i for i, _ in loc], dtype=int)
        self.s = np.array([s for _, s in loc])

    def _nodal(self, psi, i):
        ip = np.minimum(i + 1, self.n - 1)
        im = np.maximum(i - 1, 0)
        d = (psi[ip] - psi[im]) / ((ip - im) * self.dx)
        return CURRENT_SCALE * np.imag(np.conj(psi[i]) * d)

    def __call__(self, psi):
        j0 = self._nodal(psi, self.i)
        if not self.s.any():
            return j0
        j1 = self._nodal(psi, np.minimum(self.i + 1, self.n - 1))
        return (1 - self.s) * j0 + self.s * j1

    def right_masses(self, rho):
        return np.array([_right_mass(rho, self.grid, i, s) for i, s in zip(self.i, self.s)])


def current_density(wf: WaveFunction, q: float) -> float:
    return float(ProbeCurrents(wf.grid, [q])(wf.values)[0])


def _right_mass(rho, grid, i, s):
    dx = grid.dx
    if s == 0.0:
        return float(np.trapezoid(rho[i:], dx=dx))
    rq = (1 - s) * rho[i] + s * rho[i + 1]
    return float(0.5 * (1 - s) * dx * (rq + rho[i + 1]) + np.trapezoid(rho[i + 1:], dx=dx))


def right_mass(wf: WaveFunction, q: float) -> float:
    """Trapezoid integral of |Psi|^2 over [q, x_max]."""
    i, s = wf.grid.locate(q)
    return _right_mass(wf.density, wf.grid, i, s)


def interval_mass(rho, grid: SimulationGrid, a: float, b: float) -> float:
    ia, sa = grid.locate(a)
    ib, sb = grid.locate(b)
    return _right_mass(rho, grid, ia, sa) - _right_mass(rho, grid, ib, sb)


def cumulative_flux(j_samples, times) -> np.ndarray:
    """Running trapezoid integral of j, zero at the first sample."""
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    if len(steps) and not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("cumulative_flux needs uniformly sampled times")
    return cumulative_trapezoid(np.asarray(j_samples, dtype=float), times, initial=0.0)


def settle_index(j_samples, window: int, tol: float) -> int | None:
    """Earliest index k >= window with max |j| over samples k-window..k below tol."""
    a = np.abs(np.asarray(j_samples))
    if window + 1 > len(a):
        return None
    tail_max = np.lib.stride_tricks.sliding_window_view(a, window + 1).max(axis=1)
    ok = np.nonzero(tail_max < tol)[0]
    return int(ok[0] + window) if len(ok) else None


def transmission_probability(flux: FluxSeries, settle_window: int | None = None,
                             q: float | None = None, tol: float = 1e-5,
                             final_wf: WaveFunction | None = None,
                             crosscheck_tol: float = 1e-3) -> float:
    """|T|^2 read off as f_q at the final sample, q defaulting to the rightmost probe.

    The trailing `settle_window` samples (default 10% of the run) must carry
    |j(., q)| < tol, otherwise scattering is not over and AsymptoticsError is raised.
    """
    q = max(flux.probes) if q is None else q
    jq, fq = flux.j_at(q), flux.f_at(q)
    if settle_window is None:
        settle_window = max(1, len(jq) // 10)
    residual = float(np.max(np.abs(jq[-settle_window:])))
    if residual >= tol:
        raise AsymptoticsError(
            f"not yet asymptotic: max |j(t, {q:g})| over the last {settle_window} samples "
            f"is {residual:.3e} >= {tol:.1e}; extend the run")
    t2 = float(fq[-1])
    if final_wf is not None:
        rm = right_mass(final_wf, q)
        if abs(rm - t2) > crosscheck_tol:
            raise InvariantError(
                f"|T|^2 from flux ({t2:.6f}) and from final density ({rm:.6f}) differ "
                f"by more than {crosscheck_tol:g}")
    return t2


def _check_window(times, tau_i, tau_f):
    eps = 1e-9 * max(1.0, abs(times[-1]))
    if not (times[0] - eps <= tau_i <= tau_f <= times[-1] + eps):
        raise ValueError(
            f"window [{tau_i}, {tau_f}] not covered by samples [{times[0]}, {times[-1]}]")


def _running_integral(times, y, t):
    """Exact integral of the piecewise-linear interpolant of y from times[0] to t."""
    times = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    g = cumulative_trapezoid(y, times, initial=0.0)
    t = np.clip(np.asarray(t, dtype=float), times[0], times[-1])
    k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)
    h = t - times[k]
    yt = y[k] + (y[k + 1] - y[k]) * h / (times[k + 1] - times[k])
    return g[k] + 0.5 * h * (y[k] + yt)


def window_integral(times, y, tau_i, tau_f) -> float:
    _check_window(times, tau_i, tau_f)
    r = _running_integral(times, y, [tau_i, tau_f])
    return float(r[1] - r[0])


def transmission_integrand(f_a, f_b, T2):
    return np.minimum(f_a, T2) - np.minimum(f_b, T2)


def reflection_integrand(f_a, f_b, T2):
    return np.maximum(f_a, T2) - np.maximum(f_b, T2)


def transmission_time(times, f_a, f_b, T2, tau_i, tau_f) -> float:
    return window_integral(times, transmission_integrand(f_a, f_b, T2), tau_i, tau_f)


def reflection_time(times, f_a, f_b, T2, tau_i, tau_f) -> float:
    return window_integral(times, reflection_integrand(f_a, f_b, T2), tau_i, tau_f)


def flux_dwell_time(times, f_a, f_b, tau_i, tau_f) -> float:
    """int (f_a - f_b) dt: the dwell time expressed through edge fluxes."""
    return window_integral(times, np.asarray(f_a) - np.asarray(f_b), tau_i, tau_f)


def oriols_transmission_time(times, f_a, f_b, T2, tau_i, tau_f) -> float:
    """Reduced form valid when j(., b) >= 0, i.e. f_b <= T2 throughout."""
    return window_integral(times, np.minimum(f_a, T2) - f_b, tau_i, tau_f)


def oriols_reflection_time(times, f_a, f_b, T2, tau_i, tau_f) -> float:
    return window_integral(times, np.maximum(f_a, T2) - T2, tau_i, tau_f)


def average_dwell_time(snapshots: Snapshots, a: float, b: float, tau_i: float, tau_f: float) -> float:
    """int dt int_a^b |Psi|^2 dx over the snapshot history."""
    grid = snapshots.grid
    for q in (a, b):
        if not grid.contains(q):
            raise ValueError(f"interval end {q} outside grid")
    inside = np.array([interval_mass(np.abs(p) ** 2, grid, a, b) for p in snapshots.psi])
    return window_integral(snapshots.times, inside, tau_i, tau_f)


@dataclass
class DwellTimeReport:
    tau_T: float
    tau_R: float
    tau_D: float
    tau_T_cond: float
    tau_R_cond: float
    T2: float
    R2: float
    window: tuple[float, float]
    method: str
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def conditional(tau, weight):
    return tau / weight if weight > COND_FLOOR else float("nan")


def formula_report(flux: FluxSeries, a: float, b: float, tau_i: float, tau_f: float,
                   settle_window: int | None = None, settle_tol: float = 1e-5,
                   final_wf: WaveFunction | None = None) -> DwellTimeReport:
    """Transmission/reflection/dwell times from edge fluxes alone.

    |T|^2 always comes from the flux readout at b, so tau_T + tau_R equals the
    flux dwell time by construction.
    """
    start = time.perf_counter()
    T2 = transmission_probability(flux, settle_window, q=b, tol=settle_tol, final_wf=final_wf)
    f_a, f_b = flux.f_at(a), flux.f_at(b)
    tT = transmission_time(flux.times, f_a, f_b, T2, tau_i, tau_f)
    tR = reflection_time(flux.times, f_a, f_b, T2, tau_i, tau_f)
    wall = time.perf_counter() - start
    tD = flux_dwell_time(flux.times, f_a, f_b, tau_i, tau_f)
    return DwellTimeReport(tT, tR, tD, conditional(tT, T2), conditional(tR, 1 - T2),
                           T2, 1 - T2, (tau_i, tau_f), "formula", wall)


@dataclass
class DwellCurves:
    s: np.ndarray
    tau_T: np.ndarray
    tau_R: np.ndarray
    tau_D: np.ndarray
    tau_T_cond: np.ndarray
    tau_R_cond: np.ndarray
    tau_D_density: np.ndarray | None = None


def dwell_time_curves(times, f_a, f_b, T2, tau_i, s_values,
                      snapshots: Snapshots | None = None,
                      a: float | None = None, b: float | None = None) -> DwellCurves:
    """Dwell times over [tau_i, s] as functions of the upper bound s.

    tau_D is the flux dwell time, so tau_T + tau_R = tau_D holds row by row.
    With snapshots (and a, b) the density-based dwell curve is added too.
    """
    s = np.asarray(s_values, dtype=float)
    if len(s):
        _check_window(times, tau_i, float(s.min()))
        _check_window(times, tau_i, float(s.max()))
    if np.any(s < tau_i):
        raise ValueError("s values must not precede tau_i")

    def curve(y):
        r = _running_integral(times, y, np.concatenate([[tau_i], s]))
        return r[1:] - r[0]

    tT = curve(transmission_integrand(f_a, f_b, T2))
    tR = curve(reflection_integrand(f_a, f_b, T2))
    tD = tT + tR
    nan = np.full_like(s, np.nan)
    tTc = tT / T2 if T2 > COND_FLOOR else nan
    tRc = tR / (1 - T2) if 1 - T2 > COND_FLOOR else nan
    dens = None
    if snapshots is not None:
        inside = np.array([interval_mass(np.abs(p) ** 2, snapshots.grid, a, b)
                           for p in snapshots.psi])
        r = _running_integral(snapshots.times, inside, np.concatenate([[tau_i], s]))
        dens = r[1:] - r[0]
    return DwellCurves(s, tT, tR, tD, tTc, tRc, dens)


def unit_scales(V0_eV: float, m_eff_ratio: float) -> tuple[float, float]:
    """Reduced time and length units (fs, Angstrom) for barrier height V0 and
    effective mass m_eff_ratio * m_e."""
    if not (V0_eV > 0 and m_eff_ratio > 0):
        raise ValueError(f"need positive V0_eV and m_eff_ratio, got {V0_eV}, {m_eff_ratio}")
    v0 = V0_eV * constants.e
    m = m_eff_ratio * constants.m_e
    t_unit = constants.hbar / (2 * v0)
    x_unit = constants.hbar / np.sqrt(2 * m * v0)
    return t_unit * 1e15, x_unit * 1e10
