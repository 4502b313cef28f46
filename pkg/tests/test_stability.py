import math

import numpy as np
import pytest

from core.dynamic_controller import composite_lyapunov, composite_lyapunov_rate, tune_dyn_gains, yaw_error_rate
from core.kinematic_controller import KinGains, kinematic_loop_rhs, settling_estimates
from core.stability import (
    composite_lyapunov_trajectory, jacobian_eigenvalues, kinematic_equilibrium, kinematic_lyapunov_rate,
    reaching_margin, settling_time, simulate_kinematic_loop,
)
from core.studies import constant_gains
from core.vehicle import dyn_coeffs


@pytest.fixture
def gentle():
    return KinGains.from_dict({"preset": "gentle"})


def test_equilibrium_absorbs_the_slip_mismatch(gentle):
    z = kinematic_equilibrium(gentle, 0.65, 10.0, delta_ar=0.01)
    np.testing.assert_allclose(z, [math.asin(0.01), 0.0, -10.0 * 0.01 / 0.04], atol=1e-10)
    np.testing.assert_allclose(kinematic_loop_rhs(z, gentle, 0.65, 10.0, delta_ar=0.01), 0.0, atol=1e-12)


def test_linearised_loop_matches_the_characteristic_polynomial(gentle):
    eig = jacobian_eigenvalues(gentle, 0.65, 10.0)
    expected = np.sort_complex(np.roots([1.0, 1.0, 0.65, 0.04]))
    np.testing.assert_allclose(np.sort_complex(eig), expected, atol=1e-4)
    assert np.all(eig.real < 0)
    assert min(abs(eig.real)) == pytest.approx(0.0682, abs=1e-3)


def test_kinematic_lyapunov_rate_negative_off_the_manifold(gentle):
    S = np.concatenate([np.linspace(-1.0, -0.01, 50), np.linspace(0.01, 1.0, 50)])
    assert np.all(kinematic_lyapunov_rate(S, gentle, 0.65, 10.0) < 0)
    assert np.all(reaching_margin(S, gentle, 0.65) > 0)


def test_reaching_margin_fails_for_a_thin_margin():
    gains = KinGains(psi_kin=0.01, eps_kin=0.1)
    assert np.any(reaching_margin(np.linspace(0.01, 1.0, 100), gains, 3.0) < 0)


@pytest.mark.parametrize("seed", range(100))
def test_composite_lyapunov_never_increases(nominal, seed):
    coeffs = dyn_coeffs(nominal, 10.0)
    gains = tune_dyn_gains(nominal, (10.0, 10.0))
    rng = np.random.default_rng(seed)
    z0 = rng.uniform(-0.01, 0.01, size=5)
    r_kin = lambda t: (0.1 * math.sin(t), 0.1 * math.cos(t), -0.1 * math.sin(t))
    t, W = composite_lyapunov_trajectory(z0, coeffs, gains, r_kin, t_end=2.0, n_points=201)
    assert t[-1] == pytest.approx(2.0)
    assert np.all(np.diff(W) <= 1e-9 * W[0])
    assert W[-1] < 0.05 * W[0]


def test_composite_lyapunov_rate_matches_the_error_dynamics(nominal):
    coeffs = dyn_coeffs(nominal, 10.0)
    gains = tune_dyn_gains(nominal, (10.0, 10.0))
    r_e, sigma_r, phi_e, sigma_phi = 0.02, -0.001, 0.004, 0.0005
    r_e_dot = yaw_error_rate(r_e, sigma_r, phi_e, coeffs, gains)
    phi_e_dot = -r_e - gains.K_p2 * phi_e - gains.K_i2 * sigma_phi
    h = 1e-7
    ahead = composite_lyapunov(r_e + h * r_e_dot, sigma_r + h * r_e, phi_e + h * phi_e_dot, sigma_phi + h * phi_e,
                               coeffs, gains)
    behind = composite_lyapunov(r_e - h * r_e_dot, sigma_r - h * r_e, phi_e - h * phi_e_dot, sigma_phi - h * phi_e,
                                coeffs, gains)
    assert (ahead - behind) / (2 * h) == pytest.approx(composite_lyapunov_rate(r_e, phi_e, coeffs, gains), rel=1e-6)


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
def test_settling_time_follows_the_convergence_gain(c):
    gains = constant_gains(c)
    t, z = simulate_kinematic_loop([0.0, 0.25, 0.0], gains, c, 10.0, 20.0)
    T_s, _ = settling_estimates(c, 10.0)
    assert 0.7 * T_s <= settling_time(t, z[1]) <= 1.5 * T_s


def test_settling_time_with_the_field_gains():
    gains = KinGains(c0=3.0, c_ss=3.0, t_end=0.0, enforce_safety=False)
    assert gains.K_i == 0.1
    t, z = simulate_kinematic_loop([0.0, 0.25, 0.0], gains, 3.0, 10.0, 20.0)
    T_s, _ = settling_estimates(3.0, 10.0)
    assert 0.7 * T_s <= settling_time(t, z[1]) <= 1.5 * T_s


def test_settling_time_edge_cases():
    t = np.linspace(0.0, 1.0, 11)
    assert settling_time(t, np.ones(11)) == math.inf
    assert settling_time(t, np.r_[1.0, np.zeros(10)]) == pytest.approx(0.1)
    assert settling_time(t, np.r_[1.0, np.full(10, 0.01)]) == pytest.approx(0.1)
