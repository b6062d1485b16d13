import dataclasses

import pytest

from bohmdwell import ConfigError, ScenarioConfig, load_config, load_shipped, parse_config
from bohmdwell.config import parse_segments, shipped_scenarios


def test_shipped_scenarios_load():
    names = shipped_scenarios()
    assert {"double_barrier", "free_packet", "opaque_barrier"} <= set(names)
    for n in names:
        cfg = load_shipped(n)
        assert cfg.name == n
        cfg.validate()


def test_default_is_double_barrier():
    cfg = load_config()
    assert cfg.name == "double_barrier"
    p = cfg.potential
    assert (p.a_prime, p.a, p.b, p.b_prime, p.v0, p.v1) == (-6, -3, 3, 6, 1, 2)
    assert cfg.packet.k0 == 1.5
    assert cfg.probes == (-3.0, 3.0)
    assert cfg.tau_window == (0.0, 100.0)


def test_load_by_name_and_missing_file(tmp_path):
    assert load_config("free_packet").potential.kind == "free"
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")
    with pytest.raises(ConfigError):
        load_shipped("nope")


@pytest.mark.parametrize("text, match", [
    ("[grid]\nnpoints = 100\n", "unknown key grid.npoints"),
    ("[mesh]\nx_min = 0\n", "unknown config section"),
    ("[grid]\nn_points = many\n", "not a valid int"),
    ("[grid]\ndt = -1\n", "dt="),
    ("[potential]\nkind = well\n", "potential.kind"),
    ("[potential]\na = 7\n", "a' < a < b < b'"),
    ("[packet]\nx0 = -240\n", "not inside grid"),
    ("[window]\ntau_f = 1000\n", "not inside run"),
    ("[window]\na = 5\nb = 4\n", "must be <"),
    ("[trajectories]\nscheme = sobol\n", "scheme"),
    ("[trajectories]\nn = 1\n", ">= 2"),
    ("[units]\nv0_ev = 0.25\n", "together"),
    ("[output]\ncurve_stride = 0\n", "curve_stride"),
    ("[grid\nx_min = 0\n", "cannot parse"),
])
def test_bad_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_segments_need_probes():
    with pytest.raises(ConfigError, match="window.a and window.b"):
        parse_config("[potential]\nkind = segments\nsegments = -1, 1, 3\n")


def test_parse_segments():
    segs = parse_segments("-1, 1, 3; 2, 4, -0.5, (]")
    assert [(s.left, s.right, s.height) for s in segs] == [(-1, 1, 3), (2, 4, -0.5)]
    assert (segs[0].closed_left, segs[0].closed_right) == (True, True)
    assert (segs[1].closed_left, segs[1].closed_right) == (False, True)
    for bad in ("1, 2", "a, 2, 3", "1, 2, 3, <>", ""):
        with pytest.raises(ConfigError):
            parse_segments(bad)


def test_inline_comments_and_optional_values():
    cfg = parse_config("[window]\ntau_f = 50   # half the run\nsettle_tol = 1e-3 ;; loose\n"
                       "[trajectories]\nstep_tol = auto\n")
    assert cfg.tau_window == (0.0, 50.0)
    assert cfg.window.settle_tol == 1e-3
    assert cfg.trajectories.step_tol is None


def test_every_default_is_a_config_key():
    """Each dataclass field can be set by name and shows up in the echo."""
    cfg = ScenarioConfig()
    echo = cfg.as_dict()
    for section in ("grid", "potential", "packet", "window", "trajectories", "output", "units"):
        for f in dataclasses.fields(getattr(cfg, section)):
            assert f.name in echo[section]
            raw = getattr(getattr(cfg, section), f.name)
            text = f"[{section}]\n{f.name} = {'' if raw is None else raw}\n"
            if section == "units":
                text = "[units]\nv0_ev = 0.25\nm_eff_ratio = 0.07\n"
            parse_config(text)


def test_settle_window_fraction():
    cfg = parse_config("[grid]\nn_steps = 999\n[window]\nsettle_fraction = 0.25\n")
    assert cfg.settle_window() == 250
