"""Bohmian trajectories through a recorded wave-function history.

This is the brute-force route to transmission and reflection times: sample
initial points from |Psi(0, x)|^2, integrate dx/dt = j/rho, label each path
by which side of the critical point x_c it started on, and average the time
each path spends in [a, b].
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericGuardError
from .numerics import CURRENT_SCALE, Snapshots, WaveFunction, mean_wavenumber
from .observables import DwellTimeReport, conditional, right_mass

SCHEMES = ("quantile", "weighted", "random")


def _lagrange4(s):
    """Weights and s-derivatives of the 4-point Lagrange stencil at nodes -1, 0, 1, 2."""
    s2 = s * s
    w = np.stack([
        -s * (s - 1) * (s - 2) / 6,
        (s + 1) * (s - 1) * (s - 2) / 2,
        -(s + 1) * s * (s - 2) / 2,
        (s + 1) * s * (s - 1) / 6,
    ])
    dw = np.stack([
        -(3 * s2 - 6 * s + 2) / 6,
        (3 * s2 - 4 * s - 1) / 2,
        -(3 * s2 - 2 * s - 2) / 2,
        (3 * s2 - 1) / 6,
    ])
    return w, dw


class VelocityField:
    """v = j/rho with j and rho cubically interpolated from nodal values.

    Nodal currents use the same central difference as the probe currents,
    so the field moves probability exactly as the lattice dynamics does
    (plane waves travel at sin(k dx)/dx rather than k). Numerator and
    denominator share one interpolant. Points where the interpolated density
    drops below `rho_floor_rel` times the snapshot's peak density, or where
    |v| exceeds `v_cap`, are reported as invalid.
    """

    def __init__(self, snapshots: Snapshots, rho_floor_rel: float = 1e-12,
                 v_cap: float | None = None):
        self.snapshots = snapshots
        g = snapshots.grid
        self.x_min, self.x_max, self.dx, self.n = g.x_min, g.x_max, g.dx, g.n_points
        self.floor = rho_floor_rel * np.max(np.abs(snapshots.psi) ** 2, axis=1)
        self.v_cap = v_cap

    def interpolate(self, k, x):
        """Interpolated (j, rho) at positions x on snapshot k."""
        psi = self.snapshots.psi[k]
        u = (x - self.x_min) / self.dx
        i = np.clip(np.floor(u).astype(int), 2, self.n - 4)
        s = u - i
        w, _ = _lagrange4(s)
        p = psi[i[None, :] + np.arange(-2, 4)[:, None]]
        mid = p[1:-1]
        j = CURRENT_SCALE * np.imag(np.conj(mid) * (p[2:] - p[:-2])) / (2 * self.dx)
        rho = mid.real ** 2 + mid.imag ** 2
        return (w * j).sum(axis=0), (w * rho).sum(axis=0)

    def __call__(self, k, x):
        """Velocities at positions x on snapshot k, and a validity mask."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x >= self.x_min) & (x <= self.x_max)
        j, rho = self.interpolate(k, np.clip(x, self.x_min, self.x_max))
        ok = inside & (rho >= self.floor[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            v = j / rho
        if self.v_cap is not None:
            ok &= np.abs(v) <= self.v_cap
        ok &= np.isfinite(v)
        return np.where(ok, v, 0.0), ok


def bohmian_velocity(wf: WaveFunction, x: float, rho_floor_rel: float = 1e-12) -> float:
    snaps = Snapshots(wf.grid, np.array([wf.t]), wf.values[None, :])
    if not wf.grid.contains(x):
        raise NumericGuardError(f"x={x} outside grid")
    v, ok = VelocityField(snaps, rho_floor_rel)(0, x)
    if not ok[0]:
        raise NumericGuardError(
            f"density at x={x:g}, t={wf.t:g} below floor ({rho_floor_rel:g} x peak): "
            f"too close to a node of Psi for a velocity")
    return float(v[0])


def _integrate(field: VelocityField, x0, k_from, k_to, tol=None, max_depth=12):
    """Adaptive RK4 through snapshots k_from..k_to.

    The velocity field is linear in time between snapshots. Each snapshot
    interval is covered by step-doubling RK4: a step is accepted once full
    and two-half-step results agree within `tol` (default dx/500), otherwise
    it is halved, at most `max_depth` times; at that depth the step is taken
    as long as every stage saw a valid velocity. Returns paths
    (k_to-k_from+1, N) and the snapshot index at which each trajectory
    failed (-1 if it did not); failed paths hold NaN from there on.
    With k_to < k_from the paths run backwards in time.
    """
    times = field.snapshots.times
    tol = field.dx / 500 if tol is None else tol
    x = np.array(x0, dtype=float)
    n = len(x)
    sign = 1 if k_to >= k_from else -1
    paths = np.full((abs(k_to - k_from) + 1, n), np.nan)
    paths[0] = x
    failed_at = np.full(n, -1)
    alive = np.ones(n, dtype=bool)
    for r, k in enumerate(range(k_from, k_to, sign)):
        idx = np.nonzero(alive)[0]
        lo = min(k, k + sign)
        w0 = 0.0 if sign > 0 else 1.0
        xs, ok = _adaptive_interval(field, lo, times[lo + 1] - times[lo], x[idx], w0,
                                    float(sign), tol, max_depth)
        bad = idx[~ok]
        failed_at[bad] = k + sign
        alive[bad] = False
        x[idx[ok]] = xs[ok]
        paths[r + 1, idx[ok]] = xs[ok]
    return paths, failed_at


def _velocity(field, k, w, xs):
    if w == 0.0:
        return field(k, xs)
    if w == 1.0:
        return field(k + 1, xs)
    v0, ok0 = field(k, xs)
    v1, ok1 = field(k + 1, xs)
    return (1 - w) * v0 + w * v1, ok0 & ok1


def _rk4(field, k, span, xs, w, hw, k1=None):
    h = hw * span
    if k1 is None:
        k1 = _velocity(field, k, w, xs)
    v1, o1 = k1
    v2, o2 = _velocity(field, k, w + 0.5 * hw, xs + 0.5 * h * v1)
    v3, o3 = _velocity(field, k, w + 0.5 * hw, xs + 0.5 * h * v2)
    v4, o4 = _velocity(field, k, w + hw, xs + h * v3)
    return xs + h / 6 * (v1 + 2 * v2 + 2 * v3 + v4), o1 & o2 & o3 & o4


def _adaptive_interval(field, k, span, xs, w, hw, tol, depth_left):
    k1 = _velocity(field, k, w, xs)
    full, ok_f = _rk4(field, k, span, xs, w, hw, k1)
    half, ok_1 = _rk4(field, k, span, xs, w, 0.5 * hw, k1)
    two, ok_2 = _rk4(field, k, span, half, w + 0.5 * hw, 0.5 * hw)
    ok = ok_f & ok_1 & ok_2
    err = np.abs(two - full)
    accept = ok & (err <= tol)
    out = two + (two - full) / 15.0
    if depth_left == 0:
        return out, ok
    redo = ~accept
    if redo.any():
        mid, ok_m = _adaptive_interval(field, k, span, xs[redo], w, 0.5 * hw, tol, depth_left - 1)
        end, ok_e = _adaptive_interval(field, k, span, mid, w + 0.5 * hw, 0.5 * hw, tol,
                                       depth_left - 1)
        out[redo] = end
        accept[redo] = ok_m & ok_e
    return out, accept


def _snapshot_index(times, t):
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigError(f"t={t} is not a snapshot time")
    return k


def integrate_trajectory(x0: float, snapshots: Snapshots, t_from: float | None = None,
                         t_to: float | None = None, rho_floor_rel: float = 1e-12,
                         v_cap: float | None = None, tol: float | None = None) -> np.ndarray:
    """Path of the trajectory through x0 at t_from, sampled at the snapshot times
    from t_from to t_to (either direction)."""
    times = snapshots.times
    k0 = _snapshot_index(times, times[0] if t_from is None else t_from)
    k1 = _snapshot_index(times, times[-1] if t_to is None else t_to)
    if not snapshots.grid.contains(x0):
        raise NumericGuardError(f"x0={x0} outside grid")
    paths, failed = _integrate(VelocityField(snapshots, rho_floor_rel, v_cap), [x0], k0, k1, tol)
    if failed[0] >= 0:
        raise NumericGuardError(
            f"trajectory from x0={x0:g} failed at t={times[failed[0]]:g}: "
            f"left the grid, hit a density node or exceeded the velocity cap")
    return paths[:, 0]


def trajectory_dwell(paths, times, a: float, b: float, tau_i: float, tau_f: float):
    """Time each piecewise-linear path spends in [a, b] during [tau_i, tau_f].

    `paths` is (n_times,) or (n_times, N); entry/exit instants are located by
    linear interpolation inside each step.
    """
    paths = np.asarray(paths, dtype=float)
    times = np.asarray(times, dtype=float)
    single = paths.ndim == 1
    if single:
        paths = paths[:, None]
    eps = 1e-9 * max(1.0, abs(times[-1]))
    if tau_i < times[0] - eps or tau_f > times[-1] + eps or tau_f < tau_i:
        raise ValueError(f"window [{tau_i}, {tau_f}] not covered by path [{times[0]}, {times[-1]}]")
    t0, t1 = times[:-1, None], times[1:, None]
    h = t1 - t0
    # window restricted to each step, as fractions of the step
    lo_w = np.clip((tau_i - t0) / h, 0.0, 1.0)
    hi_w = np.clip((tau_f - t0) / h, 0.0, 1.0)
    x0, x1 = paths[:-1], paths[1:]
    dx = x1 - x0
    with np.errstate(divide="ignore", invalid="ignore"):
        sa = (a - x0) / dx
        sb = (b - x0) / dx
    moving = dx != 0
    lo = np.where(moving, np.minimum(sa, sb), 0.0)
    hi = np.where(moving, np.maximum(sa, sb), 1.0)
    still_inside = (~moving) & (x0 >= a) & (x0 <= b)
    lo = np.where(moving | still_inside, lo, 1.0)
    hi = np.where(moving | still_inside, hi, 0.0)
    lo = np.maximum(lo, lo_w)
    hi = np.minimum(hi, hi_w)
    frac = np.clip(hi - lo, 0.0, None)
    out = (frac * h).sum(axis=0)
    return float(out[0]) if single else out


def _cumulative_left_mass(rho, dx):
    c = np.empty_like(rho)
    c[0] = 0.0
    c[1:] = np.cumsum(0.5 * dx * (rho[1:] + rho[:-1]))
    return c


def quantile_positions(wf: WaveFunction, probs) -> np.ndarray:
    """Positions where the trapezoid left-mass of |Psi|^2 reaches probs * total.

    The density is linear within a cell, so the cumulative mass is quadratic
    there and is inverted exactly.
    """
    g = wf.grid
    rho = wf.density
    c = _cumulative_left_mass(rho, g.dx)
    target = np.asarray(probs, dtype=float) * c[-1]
    i = np.clip(np.searchsorted(c, target, side="right") - 1, 0, g.n_points - 2)
    m = (target - c[i]) / g.dx
    r0, d = rho[i], rho[i + 1] - rho[i]
    disc = np.sqrt(np.maximum(r0 * r0 + 2 * d * m, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(r0 + disc > 0, 2 * m / (r0 + disc), 0.0)
    return g.x[i] + np.clip(s, 0.0, 1.0) * g.dx


def critical_initial_point(wf0: WaveFunction, T2: float, tol: float | None = None,
                           max_iter: int = 200) -> float:
    """x_c with right_mass(wf0, x_c) = T2, by bisection.

    Returns the leftmost solution if the cumulative mass has a flat stretch.
    """
    if not 0.0 < T2 < 1.0:
        raise ValueError(f"T2={T2} must lie in (0, 1) for a critical point to exist")
    g = wf0.grid
    tol = g.dx / 100 if tol is None else tol
    lo, hi = g.x_min, g.x_max
    if not right_mass(wf0, lo) > T2 >= right_mass(wf0, hi):
        raise NumericGuardError(f"right-mass does not bracket T2={T2} on the grid")
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if right_mass(wf0, mid) > T2:
            lo = mid
        else:
            hi = mid
    raise NumericGuardError(f"bisection for x_c did not converge within {max_iter} iterations")


def initial_points(wf0: WaveFunction, N: int, scheme: str = "quantile",
                   seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Start positions and weights (summing to one) for N trajectories."""
    if N < 2:
        raise ConfigError(f"need at least 2 trajectories, got {N}")
    if scheme == "quantile":
        x = quantile_positions(wf0, np.arange(1, N + 1) / (N + 1))
        w = np.full(N, 1.0 / N)
    elif scheme == "random":
        u = np.sort(np.random.default_rng(seed).uniform(size=N))
        x = quantile_positions(wf0, u)
        w = np.full(N, 1.0 / N)
    elif scheme == "weighted":
        lo, hi = quantile_positions(wf0, [1e-9, 1 - 1e-9])
        x = lo + (np.arange(N) + 0.5) * (hi - lo) / N
        rho = np.interp(x, wf0.grid.x, wf0.density)
        w = rho / rho.sum()
    else:
        raise ConfigError(f"unknown sampling scheme {scheme!r}; expected one of {SCHEMES}")
    return x, w


@dataclass
class Trajectory:
    x0: float
    path: np.ndarray = field(repr=False)
    transmitted: bool
    dwell: float

    @property
    def label(self) -> str:
        return "Transmitted" if self.transmitted else "Reflected"


@dataclass
class TrajectoryEnsemble:
    x0: np.ndarray
    weights: np.ndarray
    times: np.ndarray
    paths: np.ndarray = field(repr=False)
    transmitted: np.ndarray
    dwell: np.ndarray
    x_c: float
    T2: float
    scheme: str
    casualties: list = field(default_factory=list)

    def __len__(self):
        return len(self.x0)

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(float(self.x0[i]), self.paths[:, i], bool(self.transmitted[i]),
                          float(self.dwell[i]))

    @property
    def alive(self) -> np.ndarray:
        return np.all(np.isfinite(self.paths), axis=0)


def integrate_ensemble(snapshots: Snapshots, x0, k_from: int = 0, k_to: int | None = None,
                       rho_floor_rel: float = 1e-12, v_cap: float | None = None,
                       tol: float | None = None, threads: int = 1, chunk: int = 250):
    """Integrate many trajectories in chunks, serially or on a thread pool."""
    k_to = len(snapshots) - 1 if k_to is None else k_to
    field_ = VelocityField(snapshots, rho_floor_rel, v_cap)
    x0 = np.asarray(x0, dtype=float)
    parts = [x0[i:i + chunk] for i in range(0, len(x0), chunk)]
    run = lambda part: _integrate(field_, part, k_from, k_to, tol)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(p) for p in parts]
    paths = np.concatenate([r[0] for r in results], axis=1)
    failed = np.concatenate([r[1] for r in results])
    return paths, failed


def ensemble_times(snapshots: Snapshots, wf0: WaveFunction, T2: float, a: float, b: float,
                   tau_i: float, tau_f: float, N: int = 2000, scheme: str = "quantile",
                   seed: int | None = None, threads: int = 1, chunk: int = 250,
                   rho_floor_rel: float = 1e-12, v_cap_factor: float | None = 100.0,
                   tol: float | None = None, max_loss: float = 0.01
                   ) -> tuple[DwellTimeReport, TrajectoryEnsemble]:
    """Trajectory-sampled transmission/reflection times.

    Starts sit on the k/(N+1) quantiles of |Psi(0, x)|^2 by default. A
    trajectory is transmitted iff it starts right of x_c. The velocity cap is
    `v_cap_factor` times the packet's group velocity. Trajectories that fail
    are dropped and listed; losing more than `max_loss` of the weight aborts.
    """
    start = time.perf_counter()
    x_c = critical_initial_point(wf0, T2) if 0.0 < T2 < 1.0 else (
        snapshots.grid.x_min if T2 >= 1.0 else snapshots.grid.x_max)
    x0, w = initial_points(wf0, N, scheme, seed)
    v_cap = None
    if v_cap_factor is not None:
        v_cap = v_cap_factor * CURRENT_SCALE * abs(mean_wavenumber(wf0))
    k0 = _snapshot_index(snapshots.times, wf0.t)
    paths, failed = integrate_ensemble(snapshots, x0, k0, None, rho_floor_rel, v_cap,
                                       tol, threads, chunk)
    times = snapshots.times[k0:]
    ok = failed < 0
    casualties = [(int(i), float(x0[i]), float(times[failed[i] - k0]))
                  for i in np.nonzero(~ok)[0]]
    lost = float(w[~ok].sum())
    if lost > max_loss:
        raise NumericGuardError(
            f"{len(casualties)} trajectories failed ({lost:.2%} of the weight > {max_loss:.0%}); "
            f"first casualties (id, x0, t): {casualties[:5]}")
    dwell = np.zeros(N)
    dwell[ok] = trajectory_dwell(paths[:, ok], times, a, b, tau_i, tau_f)
    transmitted = x0 > x_c
    wt = np.where(ok, w, 0.0)
    tT = float(np.sum(wt * dwell * transmitted))
    tR = float(np.sum(wt * dwell * ~transmitted))
    pT = float(np.sum(wt * transmitted))
    pR = float(np.sum(wt * ~transmitted))
    wall = time.perf_counter() - start
    ens = TrajectoryEnsemble(x0, w, times, paths, transmitted, dwell, x_c, T2, scheme, casualties)
    report = DwellTimeReport(
        tT, tR, tT + tR, conditional(tT, pT), conditional(tR, pR), pT, 1 - pT,
        (tau_i, tau_f), "trajectories", wall,
        {"x_c": x_c, "T2_flux": T2, "N": N, "scheme": scheme, "casualties": len(casualties),
         "lost_weight": lost, "reflected_weight": pR})
    return report, ens


def no_crossing_violation(ens: TrajectoryEnsemble) -> float:
    """Largest order inversion (in x) between neighbouring starts over all times."""
    order = np.argsort(ens.x0)
    p = ens.paths[:, order][:, ens.alive[order]]
    if p.shape[1] < 2:
        return 0.0
    return float(max(0.0, -np.min(np.diff(p, axis=1))))


def critical_mass_deviation(snapshots: Snapshots, x_c: float, T2: float, **kw) -> float:
    """max_t |right_mass(t, gamma_xc(t)) - T2| along the critical trajectory."""
    path = integrate_trajectory(x_c, snapshots, **kw)
    dev = [abs(right_mass(snapshots[k], float(path[k])) - T2) for k in range(len(path))]
    return float(max(dev))


def label_mismatch_weight(ens: TrajectoryEnsemble, a: float, b: float) -> float:
    """Weight of trajectories whose final position contradicts their label."""
    final = ens.paths[-1]
    ok = ens.alive
    bad = ok & ((ens.transmitted & ~(final > b)) | (~ens.transmitted & ~(final < a)))
    return float(ens.weights[bad].sum())
