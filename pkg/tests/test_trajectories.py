import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

import oracles
from bohmdwell import (ConfigError, GaussianPacketSpec, NumericGuardError, WaveFunction,
                       gaussian_packet, make_grid, propagate_and_record)
from bohmdwell import trajectories as traj
from bohmdwell.numerics import Snapshots, free_potential
from bohmdwell.observables import right_mass


def test_real_wave_has_zero_velocity():
    g = make_grid(-10, 10, 401, 0, 0.1, 1)
    wf = WaveFunction(g, 0.0, np.exp(-g.x ** 2 / 8) * (1 + 0.2 * np.cos(g.x)))
    for x in (-2.3, 0.0, 0.71):
        assert traj.bohmian_velocity(wf, x) == 0.0


@pytest.mark.parametrize("k", [0.4, 1.5, -2.0])
def test_plane_wave_velocity(k):
    g = make_grid(0, 20, 2001, 0, 0.1, 1)
    wf = WaveFunction(g, 0.0, np.exp(1j * k * g.x))
    v = traj.bohmian_velocity(wf, 7.377)
    assert v == pytest.approx(np.sin(k * g.dx) / g.dx, rel=1e-10)
    assert v == pytest.approx(k, rel=(k * g.dx) ** 2)


def test_velocity_refused_at_node():
    g = make_grid(-10, 10, 2001, 0, 0.1, 1)
    wf = WaveFunction(g, 0.0, np.exp(-g.x ** 2 / 8 + 1j * g.x) * np.sin(np.pi * g.x / 2.5))
    with pytest.raises(NumericGuardError, match="node"):
        traj.bohmian_velocity(wf, 2.5)
    traj.bohmian_velocity(wf, 1.25)


def test_velocity_outside_grid():
    g = make_grid(-10, 10, 201, 0, 0.1, 1)
    wf = WaveFunction(g, 0.0, np.exp(-g.x ** 2))
    with pytest.raises(NumericGuardError):
        traj.bohmian_velocity(wf, 11.0)


# -- dwell of a single path -----------------------------------------------------

def test_dwell_straight_line():
    t = np.linspace(0, 10, 11)
    x = -5 + 2 * t
    assert traj.trajectory_dwell(x, t, -1.0, 3.0, 0, 10) == pytest.approx(2.0)
    # window cuts the crossing in half
    assert traj.trajectory_dwell(x, t, -1.0, 3.0, 0, 3) == pytest.approx(1.0)
    # at rest inside
    assert traj.trajectory_dwell(np.full(11, 0.5), t, 0, 1, 2, 7) == pytest.approx(5.0)


def test_dwell_zigzag_against_dense_sampling():
    t = np.linspace(0, 20, 41)
    x = 3 * np.sin(0.7 * t) + 0.1 * t
    dense = oracles.path_dwell_dense(lambda s: np.interp(s, t, x), 1.3, 17.9, -1.0, 2.0)
    got = traj.trajectory_dwell(x, t, -1.0, 2.0, 1.3, 17.9)
    assert got == pytest.approx(dense, abs=2e-4)


@given(st.floats(-3, 3), st.floats(0.05, 4), st.floats(0, 10), st.floats(0, 10))
def test_dwell_bounded_by_window(a, width, t0, t1):
    t0, t1 = sorted((t0, t1))
    t = np.linspace(0, 10, 51)
    paths = np.stack([np.sin(t + p) * 4 for p in np.linspace(0, 3, 7)], axis=1)
    d = traj.trajectory_dwell(paths, t, a, a + width, t0, t1)
    assert np.all(d >= 0) and np.all(d <= t1 - t0 + 1e-12)


# -- initial points ------------------------------------------------------------

def _packet(x0=0.0, sigma=2.0, k0=1.5):
    g = make_grid(-40, 40, 4001, 0, 0.02, 10)
    return gaussian_packet(GaussianPacketSpec(x0, sigma, k0), g)


def test_quantiles_of_gaussian():
    wf = _packet(1.0, 2.0)
    p = np.array([0.01, 0.2, 0.5, 0.77, 0.99])
    # density sd is sigma
    expect = norm.ppf(p, loc=1.0, scale=2.0)
    assert np.allclose(traj.quantile_positions(wf, p), expect, atol=1e-4)


def test_critical_point_of_symmetric_packet():
    wf = _packet(1.0, 2.0)
    assert traj.critical_initial_point(wf, 0.5) == pytest.approx(1.0, abs=wf.grid.dx / 50)


@given(st.floats(0.01, 0.99))
def test_critical_point_splits_mass(T2):
    wf = _packet()
    xc = traj.critical_initial_point(wf, T2)
    assert right_mass(wf, xc) == pytest.approx(T2, abs=1e-4)


def test_critical_point_needs_interior_T2():
    with pytest.raises(ValueError):
        traj.critical_initial_point(_packet(), 1.0)


@pytest.mark.parametrize("scheme", ["quantile", "weighted", "random"])
def test_initial_points_weights(scheme):
    x, w = traj.initial_points(_packet(), 101, scheme, seed=3)
    assert len(x) == len(w) == 101
    assert w.sum() == pytest.approx(1.0)
    assert np.all(np.diff(x) > 0)


def test_initial_points_reject():
    with pytest.raises(ConfigError):
        traj.initial_points(_packet(), 1)
    with pytest.raises(ConfigError):
        traj.initial_points(_packet(), 10, "sobol")


def test_random_scheme_seeded():
    a, _ = traj.initial_points(_packet(), 50, "random", seed=7)
    b, _ = traj.initial_points(_packet(), 50, "random", seed=7)
    c, _ = traj.initial_points(_packet(), 50, "random", seed=8)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


# -- integration -------------------------------------------------------------------

@pytest.fixture(scope="module")
def free_snaps():
    g = make_grid(-40, 60, 2001, 0, 0.02, 500)
    wf = gaussian_packet(GaussianPacketSpec(-10, 2.5, 1.5), g)
    snaps, _ = propagate_and_record(wf, free_potential(), keep_every=5)
    return snaps


@pytest.mark.parametrize("offset", [-2.0, 0.0, 1.0, 3.5])
def test_free_gaussian_paths(free_snaps, offset):
    path = traj.integrate_trajectory(-10 + offset, free_snaps)
    t = free_snaps.times
    exact = oracles.free_bohm_path(-10 + offset, t, -10, 2.5, 1.5)
    # the lattice packet moves at its discrete group velocity; allow that drift
    assert np.max(np.abs(path - exact)) < 0.02 * (1 + abs(offset))


def test_backward_integration_returns(free_snaps):
    fwd = traj.integrate_trajectory(-9.0, free_snaps)
    back = traj.integrate_trajectory(fwd[-1], free_snaps, t_from=free_snaps.times[-1],
                                     t_to=free_snaps.times[0])
    assert back[-1] == pytest.approx(-9.0, abs=1e-4)
    assert np.allclose(back[::-1], fwd, atol=1e-4)


def test_trajectory_leaving_grid_fails():
    g = make_grid(-40, 60, 2001, 0, 0.02, 10)
    wf = gaussian_packet(GaussianPacketSpec(-10, 2.5, 1.5), g)
    snaps = Snapshots(g, np.array([0.0, 0.1]), np.stack([wf.values, wf.values]))
    with pytest.raises(NumericGuardError):
        traj.integrate_trajectory(70.0, snaps)


def test_ensemble_no_crossing_and_labels(small_run):
    rep, ens = small_run.oracle(n=200)
    assert traj.no_crossing_violation(ens) == 0.0
    assert np.array_equal(ens.transmitted, ens.x0 > ens.x_c)
    assert rep.T2 == pytest.approx(small_run.T2, abs=1.0 / 200)
    assert rep.tau_T + rep.tau_R == pytest.approx(rep.tau_D)
    tr = ens[int(np.argmax(ens.x0))]
    assert tr.label == "Transmitted" and tr.path[-1] > small_run.b


def test_ensemble_matches_formula(small_run):
    rep, _ = small_run.oracle(n=200)
    f = small_run.formula()
    assert abs(rep.tau_T - f.tau_T) / f.tau_D < 0.02
    assert abs(rep.tau_R - f.tau_R) / f.tau_D < 0.02


def test_quantile_scheme_ignores_seed(small_run):
    r1, e1 = small_run.oracle(n=64, seed=1)
    r2, e2 = small_run.oracle(n=64, seed=99)
    assert np.array_equal(e1.paths, e2.paths) and r1.tau_T == r2.tau_T


def test_threads_give_identical_result(small_run):
    x0, _ = traj.initial_points(small_run.wf0, 120)
    p1, f1 = traj.integrate_ensemble(small_run.snapshots, x0, threads=1, chunk=16)
    p3, f3 = traj.integrate_ensemble(small_run.snapshots, x0, threads=3, chunk=16)
    assert np.array_equal(p1, p3, equal_nan=True) and np.array_equal(f1, f3)


def test_critical_trajectory_conserves_mass(small_run):
    _, ens = small_run.oracle(n=200)
    dev = traj.critical_mass_deviation(small_run.snapshots, ens.x_c, small_run.T2)
    assert dev < 0.01


def test_velocity_cap_casualties(small_run):
    with pytest.raises(NumericGuardError, match="failed"):
        traj.ensemble_times(small_run.snapshots, small_run.wf0, small_run.T2, small_run.a,
                            small_run.b, *small_run.window, N=20, v_cap_factor=0.2)


def test_free_ensemble_all_transmitted(free_snaps):
    wf0 = free_snaps[0]
    rep, ens = traj.ensemble_times(free_snaps, wf0, 1.0, -3.0, 3.0, 0.0, free_snaps.times[-1], N=2)
    assert ens.transmitted.all() and rep.tau_R == 0.0


@settings(max_examples=6, deadline=None)
@given(st.integers(-30, 30))
def test_paths_shift_with_the_packet(n):
    g = make_grid(-30, 50, 641, 0, 0.05, 100)   # dx = 1/8: shifts are exact
    d = n * g.dx
    wf = gaussian_packet(GaussianPacketSpec(-5, 2.5, 1.5), g)
    s0, _ = propagate_and_record(wf, free_potential(), keep_every=4)
    s1, _ = propagate_and_record(wf.shifted(d), free_potential(), keep_every=4)
    p0 = traj.integrate_trajectory(-4.3, s0)
    p1 = traj.integrate_trajectory(-4.3 + d, s1)
    assert np.allclose(p1 - d, p0, atol=1e-9)


def test_convergence_in_N(small_run):
    f = small_run.formula()
    gaps = []
    for n in (25, 200):
        rep, _ = small_run.oracle(n=n)
        gaps.append(abs(rep.tau_T - f.tau_T) + abs(rep.tau_R - f.tau_R))
    assert gaps[1] < gaps[0]
