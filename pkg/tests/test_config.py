"""Flat-file configuration parsing, defaults, echo, and builders."""

import pytest

from thermocell.config import load_config, parse_config
from thermocell.errors import ConfigError

BASE = """\
mode = run
mesh.lengths = 1, 0.4, 1
mesh.cells = 4, 2, 4
"""


def test_minimal_config_parses_with_defaults():
    cfg = parse_config(BASE)
    assert cfg.mode == "run"
    eff = cfg.effective()
    assert eff["solver"]["dt"] == 0.1
    assert eff["solver"]["tau_mode"] == "constrained_zero"
    assert eff["output"] == {"directory": "out", "stride": 1, "figures": True}
    assert eff["mesh"]["width"] is None


def test_comments_and_blank_lines_are_ignored():
    text = BASE + "\n# a comment\n\nparams.I_a = 0.3  # trailing\n"
    cfg = parse_config(text)
    assert cfg.params["I_a"] == 0.3


def test_unknown_key_reports_line_number():
    with pytest.raises(ConfigError, match=r"line 4: unknown key params\.bogus"):
        parse_config(BASE + "params.bogus = 1\n")
    with pytest.raises(ConfigError, match=r"line 4: unknown key 'nonsense'"):
        parse_config(BASE + "nonsense = 1\n")


def test_duplicate_key_reports_both_lines():
    with pytest.raises(ConfigError,
                       match=r"line 5: params.U repeats the assignment from line 4"):
        parse_config(BASE + "params.U = 0.1\nparams.U = 0.2\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="expected `section.key = value`"):
        parse_config(BASE + "just words\n")


def test_bad_value_kinds_report_location():
    with pytest.raises(ConfigError, match="line 4: solver.picard_max_iters"):
        parse_config(BASE + "solver.picard_max_iters = 2.5\n")
    with pytest.raises(ConfigError, match="not a boolean"):
        parse_config(BASE + "output.figures = maybe\n")
    with pytest.raises(ConfigError, match="time:value"):
        parse_config(BASE + "params.U_schedule = 0.5\n")


def test_missing_mesh_keys():
    with pytest.raises(ConfigError, match="missing required key mesh.cells"):
        parse_config("mesh.lengths = 1, 0.4, 1\n")
    with pytest.raises(ConfigError, match="exactly three entries"):
        parse_config("mesh.lengths = 1, 1\nmesh.cells = 2, 2\n")


def test_solver_settings_checked_eagerly():
    with pytest.raises(ConfigError, match="solver.dt must be positive"):
        parse_config(BASE + "solver.dt = -1\n")
    with pytest.raises(ConfigError, match="stride must be at least 1"):
        parse_config(BASE + "output.stride = 0\n")


def test_unknown_mode_rejected():
    with pytest.raises(ConfigError, match="unknown mode 'simulate'"):
        parse_config("mode = simulate\n" + BASE.splitlines()[1] + "\n"
                     + BASE.splitlines()[2] + "\n")


def test_none_clears_optional_values():
    cfg = parse_config(BASE + "solver.eps = none\nparams.I_c = none\n")
    assert cfg.solver["eps"] is None
    assert cfg.params["I_c"] is None


def test_flexible_values_scalar_or_per_region():
    cfg = parse_config(BASE + "params.g1 = 0.5\nparams.k = 1, 2, 3\n")
    assert cfg.params["g1"] == 0.5
    assert cfg.params["k"] == [1.0, 2.0, 3.0]


def test_schedule_values_sorted_by_time():
    cfg = parse_config(BASE + "params.U_schedule = 0.8:0.1, 0.2:0.3\n")
    assert cfg.params["U_schedule"] == ((0.2, 0.3), (0.8, 0.1))


def test_builders_produce_working_objects():
    cfg = parse_config(BASE + "params.I_a = 0.25\nsolver.dt = 0.05\n")
    mesh = cfg.build_mesh()
    assert mesh.n_cells == 10
    params = cfg.build_params(mesh)
    assert params.I_a == 0.25
    settings = cfg.build_settings().validate()
    assert settings.dt == 0.05


def test_two_dimensional_mesh_from_width():
    cfg = parse_config(BASE + "mesh.width = 0.5\nmesh.width_cells = 3\n")
    mesh = cfg.build_mesh()
    assert mesh.dimension == 2
    assert mesh.n_cells == 30


def test_echo_round_trips(tmp_path):
    cfg = parse_config(BASE + "params.I_a = 0.3\nsolver.tstar_bisect = true\n")
    text = cfg.text()
    assert "mode = run" in text
    assert "solver.tstar_bisect = true" in text
    assert "solver.eps = none" in text
    again = parse_config(text)
    assert again.effective() == cfg.effective()
    path = tmp_path / "case.cfg"
    path.write_text(text)
    assert load_config(path).effective() == cfg.effective()
