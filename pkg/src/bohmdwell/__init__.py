"""Flux-based Bohmian transmission and reflection dwell times for 1D wave packets."""
from .config import ScenarioConfig, load_config, load_shipped, parse_config
from .errors import (AsymptoticsError, BohmDwellError, ConfigError, InvariantError,
                     NumericGuardError)
from .numerics import (CrankNicolson, GaussianPacketSpec, PiecewisePotential, Segment,
                       SimulationGrid, Snapshots, WaveFunction, double_barrier, gaussian_packet,
                       make_grid, step)
from .observables import (DwellTimeReport, FluxSeries, average_dwell_time, dwell_time_curves,
                          formula_report, reflection_time, transmission_probability,
                          transmission_time)
from .propagation import propagate_and_record
from .runner import ScenarioRun, run_scenario
from .trajectories import TrajectoryEnsemble, ensemble_times, integrate_trajectory

__version__ = "0.1.0"
