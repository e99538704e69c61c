import math

import pytest

from ringfilm.config import (
    KINDS,
    default_config,
    dump_config,
    parse_config,
    parse_text,
    parse_windows,
)
from ringfilm.exceptions import ConfigurationError


def test_missing_kind_is_named():
    with pytest.raises(ConfigurationError, match="kind"):
        parse_text("[scenario]\n")
    with pytest.raises(ConfigurationError, match="kind"):
        parse_text("")


def test_stationary_defaults():
    cfg = parse_text("[scenario]\nkind = stationary_1d\n")
    grid = cfg.grid()
    assert grid.dx1 == pytest.approx(0.005)
    assert cfg.time.dt == pytest.approx(0.01)
    assert cfg.dynamics.B_r == 41.0
    assert cfg.dynamics.gamma == 0.9
    assert cfg.ring.R == 64.0
    assert cfg.dynamics.fixed_Z


@pytest.mark.parametrize("kind", KINDS)
def test_round_trip(kind):
    cfg = default_config(kind)
    again = parse_text(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


def test_round_trip_through_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[scenario]\nkind = full_cycle\n[wear]\ndelta = 0.04\n")
    cfg = parse_config(path)
    assert cfg.wear.delta == 0.04
    path2 = tmp_path / "d.ini"
    path2.write_text(dump_config(cfg))
    assert parse_config(path2) == cfg


def test_unknown_section_and_key():
    with pytest.raises(ConfigurationError, match="bogus"):
        parse_text("[scenario]\nkind = full_cycle\n[bogus]\na = 1\n")
    with pytest.raises(ConfigurationError, match="ring.radius"):
        parse_text("[scenario]\nkind = full_cycle\n[ring]\nradius = 3\n")


def test_overrides_apply_before_validation():
    cfg = parse_text("[scenario]\nkind = full_cycle\n", overrides=["wear.delta=0.03"])
    assert cfg.wear.delta == 0.03
    with pytest.raises(ConfigurationError, match="wear.delta"):
        parse_text("[scenario]\nkind = full_cycle\n", overrides=["wear.delta=abc"])
    with pytest.raises(ConfigurationError, match="override"):
        parse_text("[scenario]\nkind = full_cycle\n", overrides=["wear.delta"])
    with pytest.raises(ConfigurationError):
        parse_text("[scenario]\nkind = full_cycle\n", overrides=["mesh.n_x1=2"])


def test_default_kind_fills_empty_kind():
    cfg = parse_text("[wear]\ndelta = 0.01\n", default_kind="full_cycle")
    assert cfg.kind == "full_cycle"
    with pytest.raises(ConfigurationError, match="kind"):
        parse_text("[scenario]\nkind = nonsense\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(tmp_path / "none.ini")


def test_parse_error():
    with pytest.raises(ConfigurationError, match="parse"):
        parse_text("no section header\n")


def test_kind_specific_defaults():
    tex = default_config("textured_transient")
    assert tex.texture.enabled
    assert tex.dynamics.Z0 == 0.8
    assert tex.grid().n_x2 == tex.grid().n_x1 // 10
    assert tex.grid().length_x2 == pytest.approx(0.1)
    assert tex.copies == pytest.approx(2 * math.pi * 41.0 / 0.1)
    cmp_ = default_config("model_compare")
    assert cmp_.time.dt == pytest.approx(2 * cmp_.grid().dx1)
    cyc = default_config("full_cycle")
    assert cyc.ring.delta_h == 2.0
    assert cyc.cycle.speed_mode == "sinusoid"
    assert not cyc.texture.enabled


def test_windows():
    assert parse_windows("290:314:0.05") == [(290.0, 314.0, 0.05)]
    assert parse_windows("none") == []
    with pytest.raises(ConfigurationError):
        parse_windows("1:0:0.1")
    with pytest.raises(ConfigurationError):
        parse_windows("0:10:0.1;5:20:0.1")
