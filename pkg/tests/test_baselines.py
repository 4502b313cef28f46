import math
import os

import pytest

import config
from core.batch_runner import batch, repeat_seeds
from core.baselines import (
    BaselineAController, BaselineAGains, BaselineAState, BaselineBController, BaselineBGains, baseline_a_step,
    baseline_b_kinematic, critical_settling_frequency, steady_yaw_gain, tune_baseline_a,
)
from core.error_model import ErrorState
from core.exceptions import ParameterError
from core.kinematic_controller import PROP, PROP_S, KinGains
from core.metrics import aggregate_traces
from core.scenario import load_scenario
from core.vehicle import PHI_MAX, dyn_coeffs

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios")


def test_critical_settling_frequency():
    w = critical_settling_frequency(4.0)
    assert w * 4.0 == pytest.approx(5.834, abs=1e-3)
    assert (1 + 4.0 * w) * math.exp(-4.0 * w) == pytest.approx(0.02)


def test_steady_yaw_gain(nominal):
    assert steady_yaw_gain(nominal, 10.0) == pytest.approx(3.428, abs=2e-3)


def test_tuning_relations(nominal):
    gains = tune_baseline_a(nominal)
    w = critical_settling_frequency(4.0)
    assert gains.kin_kp == pytest.approx(w ** 2 / 7.0)
    assert gains.kin_kd == pytest.approx(2 * w / 7.0)
    assert gains.kin_ki == pytest.approx(gains.kin_kp * w / 10.0)
    w_i = critical_settling_frequency(2.0)
    assert gains.dyn_kp == pytest.approx(2 * w_i / steady_yaw_gain(nominal, 10.0))


def test_negative_gain_rejected():
    with pytest.raises(ParameterError):
        BaselineAGains(kin_kp=-1.0, kin_ki=0.0, kin_kd=0.0, dyn_kp=1.0, dyn_ki=0.0)


def test_cascade_at_rest_commands_nothing(nominal):
    ctl = BaselineAController(tune_baseline_a(nominal), nominal)
    assert ctl.step(ErrorState(), 0.0, 0.0, 10.0, 0.01) == (0.0, 0.0)


def test_cascade_turns_toward_the_path(nominal):
    ctl = BaselineAController(tune_baseline_a(nominal), nominal)
    omega, r_cmd = ctl.step(ErrorState(y_e=0.5), 0.0, 0.0, 10.0, 0.01)
    assert r_cmd > 0 and omega > 0


def test_outer_command_is_clamped_and_integrator_frozen():
    gains = BaselineAGains(kin_kp=1.0, kin_ki=0.0, kin_kd=0.0, dyn_kp=1.0, dyn_ki=0.5)
    state = BaselineAState()
    omega, r_cmd = baseline_a_step(ErrorState(y_e=5.0), 0.0, 0.0, gains, 0.01, state, 10.0, 3.0)
    assert r_cmd == pytest.approx(10.0 * math.tan(PHI_MAX) / 3.0)
    assert omega == 0.3
    assert state.sigma_r == 0.0


def test_cascade_needs_positive_dt():
    with pytest.raises(ParameterError):
        baseline_a_step(ErrorState(), 0.0, 0.0, BaselineAGains(1, 0, 0, 1, 0), 0.0, BaselineAState(), 10.0, 3.0)


def test_non_slip_kinematic_law_turns_toward_the_path():
    r_kin, S, rho = baseline_b_kinematic(ErrorState(y_e=0.5), KinGains(), 1.0, 0.0, 10.0)
    assert S < 0
    assert r_kin > 0


def test_non_slip_controller_differentiates_its_reference(nominal):
    ctl = BaselineBController(BaselineBGains(), nominal)
    coeffs = dyn_coeffs(nominal, 10.0)
    ctl.step(ErrorState(y_e=0.5), 0.0, 0.0, coeffs, 0.01, 10.0, 10.0)
    assert ctl.state.r_ref_dot == 0.0
    first = ctl.state.r_ref
    omega, second = ctl.step(ErrorState(y_e=0.45), 0.0, 0.0, coeffs, 0.01, 10.01, 10.0)
    assert ctl.state.r_ref_dot == pytest.approx((second - first) / 0.01)
    assert abs(omega) <= 0.3


def test_non_slip_gains_from_mapping():
    gains = BaselineBGains.from_dict({"K_p1": 50.0, "kinematic": {"preset": "gentle"}})
    assert gains.K_p1 == 50.0 and gains.K_p2 == 8.0
    assert gains.kin.K_i == 0.04


def test_non_slip_gains_keep_a_wide_boundary_layer():
    assert BaselineBGains().kin.eps_kin == config.BASELINE_B_EPS_KIN
    assert BaselineBGains.from_dict({}).kin.eps_kin == config.BASELINE_B_EPS_KIN
    assert BaselineBGains.from_dict({"kinematic": {"eps_kin": 0.05}}).kin.eps_kin == 0.05


def test_non_slip_ramp_term_is_scaled_by_speed():
    _, _, rho = baseline_b_kinematic(ErrorState(y_e=0.5), KinGains(), 1.0, 2.0, 10.0)
    expected = (2.0 * 0.5 / 10.0 + 0.1 * 0.5 / 10.0) / math.sqrt(1.0 - 0.05 ** 2)
    assert rho == pytest.approx(expected)


@pytest.mark.slow
def test_controller_ordering_on_the_comprehensive_path():
    base = load_scenario(os.path.join(SCENARIO_DIR, "comprehensive.yaml"))
    tables = {}
    for name in ("B", PROP, PROP_S):
        result = batch(repeat_seeds(base.with_overrides(controller=name), 3), workers=1)
        assert not result.failures, name
        tables[name] = aggregate_traces(result.traces)

    smooth, plain, non_slip = tables[PROP_S], tables[PROP], tables["B"]
    assert smooth["b1"].E_RNG[0] <= plain["b1"].E_RNG[0]
    assert smooth["b1"].A_RMS[0] <= plain["b1"].A_RMS[0]
    assert smooth["a1"].E_L10[0] <= non_slip["a1"].E_L10[0]
    assert smooth["a1"].pct_converged == 100.0
    assert smooth["a1"].pct_converged >= non_slip["a1"].pct_converged
