import os
import textwrap

import pytest

from core.exceptions import ConfigError, ParameterError
from core.kinematic_controller import PROP, PROP_S
from core.scenario import SpeedProfile, default_scenario, load_scenario

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios")

MINIMAL = """\
vehicle:
  truth: perturbed
path:
  named: l_path
controller:
  name: PROP
run:
  duration: 12.0
"""


def _write(tmp_path, text):
    path = tmp_path / "case.yaml"
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return str(path)


def test_bundled_l_path_scenario():
    sc = load_scenario(os.path.join(SCENARIO_DIR, "l_path_prop.yaml"))
    assert sc.name == "l_path_prop"
    assert sc.controller == PROP
    assert len(sc.segments) == 3
    assert sc.truth_params.C_f == 110e3
    assert sc.model_params.C_f == 230e3
    assert sc.duration is None
    assert sc.hgo.eps == 0.05


def test_bundled_comprehensive_scenario_is_rainy():
    sc = load_scenario(os.path.join(SCENARIO_DIR, "comprehensive.yaml"))
    assert sc.controller == PROP_S
    assert sc.weather == "rainy"
    assert sc.truth_params.mu == 0.5
    assert sc.truth_params.C_f == pytest.approx(77e3)
    assert [seg.label for seg in sc.segments] == ["a1", "b1", "c1", "d1", "e1", "f1"]
    assert sc.speed_profile.speed(2.5) == pytest.approx(4.5)


def test_minimal_scenario_uses_defaults(tmp_path):
    sc = load_scenario(_write(tmp_path, MINIMAL))
    assert sc.duration == 12.0
    assert sc.dt == 0.01
    assert sc.dyn_gains is None
    assert sc.feedback == "output"
    assert sc.substeps == 1


def test_substeps_are_read_from_the_run_section(tmp_path):
    sc = load_scenario(_write(tmp_path, MINIMAL + "  substeps: 4\n"))
    assert sc.substeps == 4
    with pytest.raises(ConfigError):
        load_scenario(_write(tmp_path, MINIMAL + "  substeps: 0\n"))


def test_missing_duration_names_the_field(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_scenario(_write(tmp_path, MINIMAL.replace("  duration: 12.0\n", "  dt: 0.01\n")))
    assert info.value.field == "run.duration"
    assert info.value.line == 7
    assert "run.duration" in str(info.value)


def test_unknown_controller_reports_its_line(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_scenario(_write(tmp_path, MINIMAL.replace("name: PROP", "name: LQR")))
    assert info.value.field == "controller.name"
    assert info.value.line == 6


def test_yaml_syntax_error_reports_a_line(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_scenario(_write(tmp_path, MINIMAL + "  seed: [1, 2\n"))
    assert info.value.line is not None


def test_invalid_gain_is_a_config_error(tmp_path):
    text = MINIMAL.replace("  name: PROP\n", "  name: PROP\n  kinematic: {K_i: 2.0}\n")
    with pytest.raises(ConfigError) as info:
        load_scenario(_write(tmp_path, text))
    assert info.value.field == "controller.kinematic"


def test_missing_segment_field(tmp_path):
    text = MINIMAL.replace("  named: l_path\n", "  segments:\n    - {kind: arc, sweep_deg: 90}\n")
    with pytest.raises(ConfigError) as info:
        load_scenario(_write(tmp_path, text))
    assert info.value.field == "path.segments[0].radius"


def test_unknown_section(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_scenario(_write(tmp_path, MINIMAL + "extras:\n  a: 1\n"))
    assert info.value.field == "extras"


def test_weather_round_trip():
    sc = default_scenario()
    rainy = sc.with_weather("rainy")
    assert rainy.truth_params.mu == 0.5
    back = rainy.with_weather("clear")
    assert back.truth_params.C_f == pytest.approx(sc.truth_params.C_f)
    assert back.truth_params.mu == sc.truth_params.mu
    assert rainy.model_params == sc.model_params


def test_scenario_invariants():
    with pytest.raises(ParameterError):
        default_scenario(dt=0.1)
    with pytest.raises(ParameterError):
        default_scenario(controller="LQR")


def test_speed_ramp():
    profile = SpeedProfile.ramp(10.0, 5.0)
    assert profile.speed(2.5) == pytest.approx(5.0)
    assert profile.acceleration(2.5) == pytest.approx(2.0)
    assert profile.speed(7.0) == 10.0
    assert profile.acceleration(7.0) == 0.0
    assert profile.final_speed == 10.0
