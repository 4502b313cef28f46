import math

import numpy as np
import pytest

from core.exceptions import ParameterError, SingularSpeedError
from core.vehicle import (
    PHI, PHI_MAX, PlantState, VehicleParams, dyn_coeffs, kappa_max, nonlinear_truth_deriv, plant_rhs,
    plant_substeps, resolve_rear_slip, rk4_step, sideslip_perturbation, steady_cornering, steady_sideslip,
    tire_slip_angles, wrap_angle,
)


def test_nominal_coefficients_at_10_mps(nominal):
    c = dyn_coeffs(nominal, 10.0)
    assert c.a11 == pytest.approx(-16.9291, abs=1e-4)
    assert c.a12 == pytest.approx(-1.17717, abs=1e-5)
    assert c.a21 == pytest.approx(-9.0)
    assert c.a22 == pytest.approx(-19.35)
    assert c.b11 == pytest.approx(9.05512, abs=1e-5)
    assert c.b21 == pytest.approx(69.0)


def test_perturbed_set_flips_understeer_moment(perturbed):
    assert dyn_coeffs(perturbed, 10.0).a21 == pytest.approx(4.8889, abs=1e-4)


def test_coefficients_floor_the_speed(nominal):
    assert dyn_coeffs(nominal, 0.0) == dyn_coeffs(nominal, nominal.v_eps)


@pytest.mark.parametrize("field, value", [("m", 0.0), ("C_r", -1.0), ("mu", 0.0), ("L_f", float("nan"))])
def test_invalid_parameters_rejected(field, value):
    values = dict(m=2540.0, J=5000.0, L_f=1.5, L_r=1.5, C_f=230e3, C_r=200e3)
    values[field] = value
    with pytest.raises(ParameterError):
        VehicleParams(**values)


def test_weather_scales_stiffness_only(nominal):
    rainy = nominal.with_weather(0.5, 0.7)
    assert rainy.mu == 0.5
    assert rainy.C_f == pytest.approx(161e3)
    assert rainy.C_r == pytest.approx(140e3)
    assert rainy.m == nominal.m


def test_wrap_angle_range():
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    np.testing.assert_allclose(wrap_angle(np.array([0.1, 2 * math.pi + 0.1])), [0.1, 0.1])


def test_slip_angles_vanish_below_floor_speed(nominal):
    assert tire_slip_angles(0.1, 0.2, 0.1, 0.2, nominal) == (0.0, 0.0)


def test_truth_model_at_rest_is_still(nominal):
    d = nonlinear_truth_deriv(PlantState(), nominal)
    np.testing.assert_allclose(d, np.zeros(5), atol=1e-15)


def test_linear_steady_state_matches_closed_form_sideslip(nominal):
    v, phi = 10.0, 0.01
    A, B = dyn_coeffs(nominal, v).matrices()
    beta, r = np.linalg.solve(A, -B * phi)
    assert steady_sideslip(r / v, nominal, v) == pytest.approx(beta, rel=1e-9)


def test_rear_slip_resolution_consistent_with_curvature(nominal):
    v, kappa = 8.0, 0.02
    beta = steady_sideslip(kappa, nominal, v)
    alpha_r = resolve_rear_slip(beta, nominal, v)
    assert alpha_r == pytest.approx(beta - nominal.L_r * kappa, rel=1e-9)
    assert sideslip_perturbation(kappa, nominal, v) == pytest.approx(beta + alpha_r, rel=1e-9)


def test_rear_slip_resolution_singular_speed(nominal):
    v = math.sqrt(nominal.C_r * nominal.wheelbase * nominal.L_r / (nominal.m * nominal.L_f))
    with pytest.raises(SingularSpeedError):
        resolve_rear_slip(0.01, nominal, v)


def test_kappa_max_branches():
    assert kappa_max(15.0) == pytest.approx(0.013911, abs=1e-6)
    assert kappa_max(5.0) == pytest.approx(0.03)


def test_steady_cornering_is_an_equilibrium(nominal):
    beta, r, kappa = steady_cornering(0.05, 10.0, nominal)
    d = nonlinear_truth_deriv(PlantState(beta=beta, r=r, phi=0.05, v=10.0), nominal)
    assert abs(d[0]) < 1e-9 and abs(d[1]) < 1e-9
    _, alpha_r = tire_slip_angles(beta, r, 0.05, 10.0, nominal)
    assert kappa == pytest.approx(math.cos(alpha_r) * (math.tan(beta) - math.tan(alpha_r)) / nominal.L_r, rel=1e-9)


def test_steering_stops_at_the_limit(nominal):
    vec = np.array([0.0, 0.0, PHI_MAX, 0.0, 0.0, 0.0])
    assert plant_rhs(vec, 10.0, 0.3, nominal)[PHI] == 0.0
    assert plant_rhs(vec, 10.0, -0.3, nominal)[PHI] == -0.3


def test_rk4_accuracy():
    x = rk4_step(lambda t, x: -x, 0.0, np.array([1.0]), 0.1)
    assert x[0] == pytest.approx(math.exp(-0.1), abs=2e-7)


def test_substeps_grow_at_low_speed(nominal):
    assert plant_substeps(nominal, 0.5, 0.01) > plant_substeps(nominal, 10.0, 0.01) >= 1
