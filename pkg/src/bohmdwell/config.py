"""Scenario configuration: INI-style sections with strictly known keys."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, get_type_hints

from .errors import ConfigError
from .numerics import (GaussianPacketSpec, PiecewisePotential, Segment, SimulationGrid,
                       double_barrier, free_potential, make_grid)

POTENTIAL_KINDS = ("double_barrier", "segments", "free")


@dataclass
class GridConfig:
    x_min: float = -250.0
    x_max: float = 350.0
    n_points: int = 12001
    t_start: float = 0.0
    dt: float = 0.02
    n_steps: int = 5000


@dataclass
class PotentialConfig:
    kind: str = "double_barrier"
    a_prime: float = -6.0
    a: float = -3.0
    b: float = 3.0
    b_prime: float = 6.0
    v0: float = 1.0
    v1: float = 2.0
    # "left,right,height[,bounds]; ..." with bounds one of [], [), (], ()
    segments: str = ""


@dataclass
class PacketConfig:
    x0: float = -25.0
    sigma_x: float = 3.5
    k0: float = 1.5
    max_negative_mass: float = 1e-8


@dataclass
class WindowConfig:
    tau_i: Optional[float] = None
    tau_f: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    settle_fraction: float = 0.1
    settle_tol: float = 1e-5
    boundary_tol: float = 1e-6
    lower_limit_tol: float = 1e-6
    identity_tol: float = 1e-3
    crosscheck_tol: float = 1e-3


@dataclass
class TrajectoryConfig:
    n: int = 2000
    scheme: str = "quantile"
    seed: int = 0
    keep_every: int = 5
    rho_floor_rel: float = 1e-12
    v_cap_factor: float = 100.0
    step_tol: Optional[float] = None
    chunk: int = 250
    threads: int = 1
    max_loss: float = 0.01
    oracle_tol: float = 0.02


@dataclass
class OutputConfig:
    dir: str = "out"
    density_stride_x: int = 20
    density_stride_t: int = 10
    curve_stride: int = 25
    trajectory_stride: int = 1


@dataclass
class UnitsConfig:
    v0_ev: Optional[float] = None
    m_eff_ratio: Optional[float] = None


@dataclass
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    packet: PacketConfig = field(default_factory=PacketConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    trajectories: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    units: UnitsConfig = field(default_factory=UnitsConfig)
    name: str = "scenario"

    # derived objects --------------------------------------------------------
    def make_grid(self) -> SimulationGrid:
        g = self.grid
        return make_grid(g.x_min, g.x_max, g.n_points, g.t_start, g.dt, g.n_steps)

    def make_potential(self) -> PiecewisePotential:
        p = self.potential
        if p.kind == "double_barrier":
            return double_barrier(p.a_prime, p.a, p.b, p.b_prime, p.v1, p.v0)
        if p.kind == "free":
            return free_potential()
        if p.kind == "segments":
            return PiecewisePotential(parse_segments(p.segments))
        raise ConfigError(f"potential.kind={p.kind!r}; expected one of {POTENTIAL_KINDS}")

    def make_packet(self) -> GaussianPacketSpec:
        return GaussianPacketSpec(self.packet.x0, self.packet.sigma_x, self.packet.k0)

    @property
    def probes(self) -> tuple[float, float]:
        w, p = self.window, self.potential
        a = w.a if w.a is not None else (p.a if p.kind == "double_barrier" else None)
        b = w.b if w.b is not None else (p.b if p.kind == "double_barrier" else None)
        if a is None or b is None:
            raise ConfigError("window.a and window.b are required unless potential.kind = double_barrier")
        return float(a), float(b)

    @property
    def tau_window(self) -> tuple[float, float]:
        g = self.grid
        ti = g.t_start if self.window.tau_i is None else self.window.tau_i
        tf = g.t_start + g.n_steps * g.dt if self.window.tau_f is None else self.window.tau_f
        return float(ti), float(tf)

    def settle_window(self) -> int:
        return max(1, int(round(self.window.settle_fraction * (self.grid.n_steps + 1))))

    def validate(self) -> "ScenarioConfig":
        """Check every precondition that can be checked without computing."""
        grid = self.make_grid()
        self.make_potential()
        spec = self.make_packet()
        a, b = self.probes
        if not a < b:
            raise ConfigError(f"window.a={a} must be < window.b={b}")
        for key, q in (("window.a", a), ("window.b", b)):
            if not grid.contains(q):
                raise ConfigError(f"{key}={q} outside grid [{grid.x_min}, {grid.x_max}]")
        ti, tf = self.tau_window
        if not grid.t_start <= ti <= tf <= grid.t_end + 1e-9:
            raise ConfigError(f"window [tau_i, tau_f]=[{ti}, {tf}] not inside run "
                              f"[{grid.t_start}, {grid.t_end}]")
        if not 0 < self.window.settle_fraction <= 1:
            raise ConfigError(f"window.settle_fraction={self.window.settle_fraction} must be in (0, 1]")
        lo, hi = spec.x0 - 8 * spec.sigma_x, spec.x0 + 8 * spec.sigma_x
        if lo < grid.x_min or hi > grid.x_max:
            raise ConfigError(f"packet.x0 +- 8 packet.sigma_x = [{lo}, {hi}] not inside grid")
        t = self.trajectories
        if t.n < 2:
            raise ConfigError(f"trajectories.n={t.n} must be >= 2")
        if t.scheme not in ("quantile", "weighted", "random"):
            raise ConfigError(f"trajectories.scheme={t.scheme!r} unknown")
        for key in ("keep_every", "chunk", "threads"):
            if getattr(t, key) < 1:
                raise ConfigError(f"trajectories.{key} must be >= 1")
        o = self.output
        for key in ("density_stride_x", "density_stride_t", "curve_stride", "trajectory_stride"):
            if getattr(o, key) < 1:
                raise ConfigError(f"output.{key} must be >= 1")
        u = self.units
        if (u.v0_ev is None) != (u.m_eff_ratio is None):
            raise ConfigError("units.v0_ev and units.m_eff_ratio must be given together")
        if u.v0_ev is not None and not (u.v0_ev > 0 and u.m_eff_ratio > 0):
            raise ConfigError("units.v0_ev and units.m_eff_ratio must be positive")
        return self

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["window"]["resolved_probes"] = list(self.probes)
        d["window"]["resolved_tau"] = list(self.tau_window)
        return d


_BOUNDS = {"[]": (True, True), "[)": (True, False), "(]": (False, True), "()": (False, False)}


def parse_segments(text: str) -> tuple[Segment, ...]:
    segs = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        parts = [p.strip() for p in item.split(",")]
        if len(parts) not in (3, 4):
            raise ConfigError(f"potential.segments entry {item!r}: expected left,right,height[,bounds]")
        try:
            left, right, height = map(float, parts[:3])
        except ValueError:
            raise ConfigError(f"potential.segments entry {item!r}: non-numeric value") from None
        bounds = parts[3] if len(parts) == 4 else "[]"
        if bounds not in _BOUNDS:
            raise ConfigError(f"potential.segments bounds {bounds!r}; expected one of {list(_BOUNDS)}")
        segs.append(Segment(left, right, height, *_BOUNDS[bounds]))
    if not segs:
        raise ConfigError("potential.kind = segments needs a non-empty potential.segments")
    return tuple(segs)


def _convert(section, key, raw, typ):
    if typ in (Optional[float], Optional[int]):
        if raw.strip().lower() in ("", "none", "auto"):
            return None
        typ = float if typ is Optional[float] else int
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}={raw!r} is not a valid {typ.__name__}") from None
    return raw.strip()


def parse_config(text: str, name: str = "scenario") -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    cfg = ScenarioConfig(name=name)
    sections = {f.name: f for f in dataclasses.fields(ScenarioConfig) if f.name != "name"}
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(f"unknown config section [{section}]; known: {sorted(sections)}")
        target = getattr(cfg, section)
        hints = get_type_hints(type(target))
        for key, raw in parser.items(section):
            if key not in hints:
                raise ConfigError(f"unknown key {section}.{key}; known: {sorted(hints)}")
            setattr(target, key, _convert(section, key, raw, hints[key]))
    return cfg.validate()


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Load a scenario file or shipped scenario name; None means double_barrier."""
    if path is None:
        return load_shipped("double_barrier")
    p = Path(path)
    if not p.exists() and p.suffix == "" and str(path) in shipped_scenarios():
        return load_shipped(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, p.stem)


def shipped_scenarios() -> list[str]:
    files = resources.files("bohmdwell").joinpath("scenarios").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".ini"))


def load_shipped(name: str) -> ScenarioConfig:
    ref = resources.files("bohmdwell").joinpath("scenarios", f"{name}.ini")
    if not ref.is_file():
        raise ConfigError(f"no shipped scenario {name!r}; available: {shipped_scenarios()}")
    return parse_config(ref.read_text(), name)
