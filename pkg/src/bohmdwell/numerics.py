"""Grid, potentials, Gaussian packets and Crank-Nicolson propagation.

Reduced units: time in hbar/(2 V0), space in hbar/sqrt(2 m V0), energy in V0.
With these scales the Schrodinger equation reads

    i dPsi/dt = 1/2 * (-d^2/dx^2 + V) Psi

so a plane wave exp(i k x) carries kinetic energy k^2 (in V0), has group
velocity k and probability current Im(conj(Psi) dPsi/dx).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lapack

from .errors import ConfigError, NumericGuardError

# Prefactor of the Hamiltonian in reduced units (time unit hbar/(2 V0)).
ENERGY_SCALE = 0.5
# hbar/m in reduced units; j = CURRENT_SCALE * Im(conj(psi) psi').
CURRENT_SCALE = 2.0 * ENERGY_SCALE

MIN_POINTS = 16


@dataclass(frozen=True)
class SimulationGrid:
    x_min: float
    x_max: float
    n_points: int
    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.t_start, self.dt)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigError(f"grid bounds must be finite, got {vals}")
        if not self.x_min < self.x_max:
            raise ConfigError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if self.n_points < MIN_POINTS:
            raise ConfigError(f"n_points={self.n_points} below resolution floor {MIN_POINTS}")
        if not self.dt > 0:
            raise ConfigError(f"dt={self.dt} must be positive")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps={self.n_steps} must be >= 1")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(self.x_min, self.x_max, self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def times(self) -> np.ndarray:
        t = self.t_start + self.dt * np.arange(self.n_steps + 1)
        t.flags.writeable = False
        return t

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.dt

    def contains(self, q: float) -> bool:
        return self.x_min <= q <= self.x_max

    def locate(self, q: float) -> tuple[int, float]:
        """Cell index i and fraction s in [0, 1) with q = x[i] + s*dx.

        Positions within 1e-9 dx of a node snap to it.
        """
        if not self.contains(q):
            raise ValueError(f"position {q} outside grid [{self.x_min}, {self.x_max}]")
        u = (q - self.x_min) / self.dx
        r = round(u)
        if abs(u - r) < 1e-9:
            u = float(r)
        i = min(int(np.floor(u)), self.n_points - 1)
        return i, u - i


def make_grid(x_min, x_max, n_points, t_start, dt, n_steps) -> SimulationGrid:
    return SimulationGrid(float(x_min), float(x_max), int(n_points),
                          float(t_start), float(dt), int(n_steps))


@dataclass(frozen=True)
class Segment:
    left: float
    right: float
    height: float
    closed_left: bool = True
    closed_right: bool = False

    def mask(self, x):
        lo = x >= self.left if self.closed_left else x > self.left
        hi = x <= self.right if self.closed_right else x < self.right
        return lo & hi


@dataclass(frozen=True)
class PiecewisePotential:
    """Piecewise-constant potential (units of V0), zero outside all segments."""

    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.left))
        object.__setattr__(self, "segments", segs)
        for s in segs:
            if not s.left < s.right:
                raise ConfigError(f"segment needs left < right, got [{s.left}, {s.right}]")
        for s0, s1 in zip(segs, segs[1:]):
            if s1.left < s0.right or (
                s1.left == s0.right and s0.closed_right and s1.closed_left
            ):
                raise ConfigError(f"segments overlap: {s0} and {s1}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = np.zeros_like(x)
        for s in self.segments:
            v = np.where(s.mask(x), s.height, v)
        return v

    def shifted(self, dx: float) -> "PiecewisePotential":
        return PiecewisePotential(tuple(
            Segment(s.left + dx, s.right + dx, s.height, s.closed_left, s.closed_right)
            for s in self.segments))


def double_barrier(a_prime, a, b, b_prime, v1, v0=1.0) -> PiecewisePotential:
    """v0 on [a, b], v1 on [a', a) and (b, b'], zero elsewhere."""
    if not a_prime < a < b < b_prime:
        raise ConfigError(f"need a' < a < b < b', got {a_prime}, {a}, {b}, {b_prime}")
    return PiecewisePotential((
        Segment(a_prime, a, v1, True, False),
        Segment(a, b, v0, True, True),
        Segment(b, b_prime, v1, False, True),
    ))


def free_potential() -> PiecewisePotential:
    return PiecewisePotential(())


@dataclass(frozen=True)
class GaussianPacketSpec:
    x0: float
    sigma_x: float
    k0: float

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ConfigError(f"sigma_x={self.sigma_x} must be positive")
        if not self.k0 > 0:
            raise ConfigError(f"k0={self.k0} must be positive")

    @property
    def sigma_k(self) -> float:
        return 1.0 / (2.0 * self.sigma_x)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: SimulationGrid
    t: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"values shape {v.shape} does not match grid ({self.grid.n_points},)")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.trapezoid(self.density, dx=self.grid.dx))

    def boundary_amplitude(self) -> float:
        return float(max(abs(self.values[0]), abs(self.values[-1])))

    def shifted(self, dx: float) -> "WaveFunction":
        g = self.grid
        grid = make_grid(g.x_min + dx, g.x_max + dx, g.n_points, g.t_start, g.dt, g.n_steps)
        return WaveFunction(grid, self.t, self.values)


def momentum_distribution(wf: WaveFunction) -> tuple[np.ndarray, np.ndarray]:
    """Wavenumbers and normalized momentum probabilities from the FFT."""
    g = wf.grid
    phi = np.fft.fft(wf.values)
    k = 2 * np.pi * np.fft.fftfreq(g.n_points, d=g.dx)
    p = np.abs(phi) ** 2
    return k, p / p.sum()


def mean_wavenumber(wf: WaveFunction) -> float:
    k, p = momentum_distribution(wf)
    return float(np.sum(k * p))


def negative_momentum_mass(wf: WaveFunction) -> float:
    k, p = momentum_distribution(wf)
    return float(p[k < 0].sum() + 0.5 * p[k == 0].sum())


def gaussian_packet(spec: GaussianPacketSpec, grid: SimulationGrid,
                    max_negative_mass: float = 1e-8, t: float | None = None) -> WaveFunction:
    """Normalized Gaussian exp(-(x-x0)^2/(4 sigma^2) + i k0 x) on the grid."""
    lo, hi = spec.x0 - 8 * spec.sigma_x, spec.x0 + 8 * spec.sigma_x
    if lo < grid.x_min or hi > grid.x_max:
        raise ConfigError(
            f"packet support [{lo:g}, {hi:g}] (x0 +- 8 sigma) not inside grid "
            f"[{grid.x_min:g}, {grid.x_max:g}]")
    x = grid.x
    psi = np.exp(-((x - spec.x0) ** 2) / (4 * spec.sigma_x**2) + 1j * spec.k0 * x)
    psi /= np.sqrt(np.trapezoid(np.abs(psi) ** 2, dx=grid.dx))
    wf = WaveFunction(grid, grid.t_start if t is None else t, psi)
    neg = negative_momentum_mass(wf)
    if neg >= max_negative_mass:
        raise ConfigError(
            f"packet not localized on positive momenta: negative-momentum mass "
            f"{neg:.3e} >= {max_negative_mass:.1e} (k0={spec.k0}, sigma_k={spec.sigma_k:.3g})")
    return wf


def hamiltonian_apply(psi: np.ndarray, v: np.ndarray, dx: float) -> np.ndarray:
    """H psi with zero (Dirichlet) ghost nodes beyond both ends."""
    lap = -2.0 * psi
    lap[1:] += psi[:-1]
    lap[:-1] += psi[1:]
    return ENERGY_SCALE * (-lap / dx**2 + v * psi)


def energy(wf: WaveFunction, potential: PiecewisePotential) -> float:
    v = potential(wf.grid.x)
    h = hamiltonian_apply(wf.values.copy(), v, wf.grid.dx)
    return float(np.real(np.vdot(wf.values, h)) * wf.grid.dx)


class CrankNicolson:
    """Factorized Crank-Nicolson propagator for a static potential.

    All grid nodes evolve; Psi vanishes on ghost nodes just outside the
    grid, which makes the discrete Hamiltonian symmetric and the step
    exactly unitary in the discrete l2 norm.
    """

    def __init__(self, grid: SimulationGrid, potential: PiecewisePotential):
        self.grid = grid
        self.potential = potential
        n, dx, dt = grid.n_points, grid.dx, grid.dt
        self.v = potential(grid.x)
        self._diag = ENERGY_SCALE * (2.0 / dx**2 + self.v)
        self._off = -ENERGY_SCALE / dx**2
        h = 0.5j * dt
        dl = np.full(n - 1, h * self._off, dtype=complex)
        d = 1.0 + h * self._diag.astype(complex)
        self._h = h
        dl, d, du, du2, ipiv, info = lapack.zgttrf(dl, d, dl.copy())
        if info != 0:
            raise NumericGuardError(f"tridiagonal factorization failed (info={info}); "
                                    f"check dt={dt}, dx={dx}")
        self._lu = (dl, d, du, du2, ipiv)

    def advance(self, psi: np.ndarray) -> np.ndarray:
        h = self._h
        rhs = (1.0 - h * self._diag) * psi
        rhs[1:] -= h * self._off * psi[:-1]
        rhs[:-1] -= h * self._off * psi[1:]
        out, info = lapack.zgttrs(*self._lu, rhs)
        if info != 0:
            raise NumericGuardError(f"tridiagonal solve failed (info={info})")
        return out


def step(wf: WaveFunction, potential: PiecewisePotential,
         propagator: CrankNicolson | None = None) -> WaveFunction:
    """One Crank-Nicolson step of size grid.dt."""
    cn = propagator or CrankNicolson(wf.grid, potential)
    return WaveFunction(wf.grid, wf.t + wf.grid.dt, cn.advance(np.array(wf.values)))


@dataclass(frozen=True, eq=False)
class Snapshots:
    """Wave-function history on a (usually strided) subset of the time steps."""

    grid: SimulationGrid
    times: np.ndarray
    psi: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> WaveFunction:
        return WaveFunction(self.grid, float(self.times[k]), self.psi[k])

    @property
    def densities(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def nbytes(self) -> int:
        return int(self.psi.nbytes + self.times.nbytes)
