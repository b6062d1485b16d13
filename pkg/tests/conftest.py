import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bohmdwell import load_shipped, make_grid, parse_config, run_scenario  # noqa: E402

# Coarse double-barrier run: a few seconds, same physics as the shipped one.
SMALL_INI = """
[grid]
x_min = -150
x_max = 170
n_points = 3201
dt = 0.05
n_steps = 700

[potential]
kind = double_barrier

[packet]
x0 = -25
sigma_x = 3.5
k0 = 1.5

[window]
settle_tol = 1e-2

[trajectories]
n = 200
keep_every = 2
"""

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def barrier_run():
    return run_scenario(load_shipped("double_barrier"))


@pytest.fixture(scope="session")
def barrier_oracle(barrier_run):
    """Serial N = 2000 quantile ensemble on the shipped double barrier."""
    return barrier_run.oracle(n=2000, threads=1)


@pytest.fixture(scope="session")
def free_run():
    return run_scenario(load_shipped("free_packet"))


@pytest.fixture(scope="session")
def opaque_run():
    return run_scenario(load_shipped("opaque_barrier"), keep_snapshots=False)


@pytest.fixture(scope="session")
def small_run():
    return run_scenario(parse_config(SMALL_INI, "small"))


@pytest.fixture
def small_ini(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL_INI)
    return p


@pytest.fixture
def small_grid():
    return make_grid(-40.0, 60.0, 2001, 0.0, 0.02, 400)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")
