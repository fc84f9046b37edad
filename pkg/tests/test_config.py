import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitycool import config
from cavitycool.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """\
[model]
omega_c_hz = 10e9
omega_s_hz = 9.9e9
rabi_hz = 100e6
g_hz = 1.0
kappa_hz = 1e6
n_spins = 1000
"""


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.name)
def test_shipped_configs_round_trip(path):
    cfg = config.load(path)
    assert config.loads(cfg.to_ini()) == cfg


def test_defaults():
    cfg = config.loads(MINIMAL)
    assert cfg.analysis.t_stop == "auto" and cfg.times() is None
    assert cfg.analysis.kappa_ratios == (0.5, 1.0, 5.0, 10.0)
    assert cfg.n_max() == 1000
    p = cfg.params()
    assert p.omega_c == pytest.approx(2 * math.pi * 10e9)
    assert p.j_subspace == 500


def test_empty_config_lists_missing_keys():
    with pytest.raises(ConfigError) as err:
        config.loads("")
    msg = str(err.value)
    for key in ("omega_c_hz", "omega_s_hz", "rabi_hz", "g_hz", "kappa_hz", "n_spins"):
        assert f"missing required key '{key}'" in msg


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r"<config>:10: unknown key 'colour'"):
        config.loads(MINIMAL + "\n[analysis]\ncolour = blue\n")


def test_unknown_section_reports_line():
    with pytest.raises(ConfigError, match=r"<config>:9: unknown section \[plots\]"):
        config.loads(MINIMAL + "\n[plots]\nx = 1\n")


def test_bad_value_reports_line():
    text = MINIMAL.replace("n_spins = 1000", "n_spins = many")
    with pytest.raises(ConfigError, match=r"<config>:7: \[model\] n_spins = 'many'"):
        config.loads(text)


@pytest.mark.parametrize("extra,match", [
    ("nbar = 1\ntemperature_k = 0.1\n", "not both"),
    ("n_spins = 10\n", "already exists|duplicate"),
])
def test_conflicts(extra, match):
    with pytest.raises(ConfigError, match=match):
        config.loads(MINIMAL + extra)


def test_invalid_physics_rejected():
    with pytest.raises(ConfigError, match="kappa"):
        config.loads(MINIMAL.replace("kappa_hz = 1e6", "kappa_hz = -1"))


def test_time_grid():
    cfg = config.loads(MINIMAL + "[analysis]\nt_start = 0.1\nt_stop = 10\nt_count = 3\nt_spacing = log\n")
    assert cfg.times().tolist() == pytest.approx([0.1, 1.0, 10.0])
    with pytest.raises(ConfigError, match="t_start > 0"):
        config.loads(MINIMAL + "[analysis]\nt_stop = 10\nt_spacing = log\n")


def test_temperature_converts():
    cfg = config.loads(MINIMAL + "temperature_k = 0.5\n")
    assert cfg.params().nbar == pytest.approx(0.6206, abs=1e-3)


def test_overrides():
    cfg = config.loads(MINIMAL, ["model.n_spins=20", "analysis.n_list=10, 20,40"])
    assert cfg.model.n_spins == 20
    assert cfg.analysis.n_list == (10, 20, 40)
    with pytest.raises(ConfigError, match="override 'nope.x=1': unknown section"):
        config.loads(MINIMAL, ["nope.x=1"])
    with pytest.raises(ConfigError, match="override 'model.spin=1'"):
        config.loads(MINIMAL, ["model.spin=1"])
    with pytest.raises(ConfigError, match="section.key=value"):
        config.loads(MINIMAL, ["n_spins=3"])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "absent.ini")


def test_echo_has_both_units():
    echo = config.loads(MINIMAL).echo()["model"]
    assert echo["g_hz"] == 1.0
    assert echo["g_rad_s"] == pytest.approx(2 * math.pi)


finite = st.floats(1e-3, 1e12, allow_nan=False)


@settings(max_examples=60)
@given(finite, finite, finite, finite, finite, st.integers(1, 10 ** 12),
       st.one_of(st.none(), st.floats(0, 1e4)),
       st.lists(st.integers(1, 10 ** 6), max_size=6),
       st.lists(st.floats(0, 1e6), max_size=6),
       st.sampled_from(["markov", "full", "both"]),
       st.one_of(st.just("auto"), st.floats(1e-3, 1e3)))
def test_round_trip_property(wc, ws, rabi, g, kappa, n, nbar, n_list, grid, engine, t_stop):
    text = (f"[model]\nomega_c_hz = {wc!r}\nomega_s_hz = {ws!r}\nrabi_hz = {rabi!r}\n"
            f"g_hz = {g!r}\nkappa_hz = {kappa!r}\nn_spins = {n}\n")
    if nbar is not None:
        text += f"nbar = {nbar!r}\n"
    text += f"[analysis]\nengine = {engine}\nt_stop = {t_stop}\n"
    if n_list:
        text += "n_list = " + ", ".join(map(str, n_list)) + "\n"
    if grid:
        text += "nbar_grid = " + ", ".join(map(repr, grid)) + "\n"
    cfg = config.loads(text)
    again = config.loads(cfg.to_ini())
    assert again == cfg
    assert again.to_ini() == cfg.to_ini()
    assert again.sha256() == cfg.sha256()
