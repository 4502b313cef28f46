import numpy as np
import pytest

from core.exceptions import ObserverStiffnessError, ParameterError
from core.observer import (
    HgoConfig, HgoState, characteristic_roots, error_dynamics_matrix, hgo_advance, hgo_rhs, hgo_step,
    observer_substeps, peaking_metric, scaled_error_matrix, steady_estimation_error,
)
from core.simulation import SimTrace
from core.vehicle import VehicleParams, dyn_coeffs


@pytest.fixture
def coeffs(nominal):
    return dyn_coeffs(nominal, 10.0)


@pytest.mark.parametrize("values", [{"eps": 0.3}, {"eps": 0.0}, {"alpha1": 0.0}])
def test_config_invariants(values):
    with pytest.raises(ParameterError):
        HgoConfig(**values)


def test_injection_gains():
    cfg = HgoConfig(eps=0.05)
    assert cfg.h1 == pytest.approx(40.0)
    assert cfg.h2 == pytest.approx(400.0)


def test_error_poles_scale_with_inverse_eps():
    cfg = HgoConfig(alpha1=3.0, alpha2=2.0, eps=0.1)
    eig = np.sort(np.linalg.eigvals(scaled_error_matrix(cfg)).real)
    np.testing.assert_allclose(eig, np.sort(characteristic_roots(cfg).real) / cfg.eps, rtol=1e-9)


def test_steady_sideslip_error_shrinks_with_eps(coeffs):
    errors = [steady_estimation_error(coeffs, HgoConfig(eps=eps), delta_beta=1.0)[1] for eps in (0.1, 0.05, 0.025)]
    assert errors[0] == pytest.approx(0.02530, abs=1e-4)
    assert errors[0] > errors[1] > errors[2] > 0


def test_step_size_guard(coeffs):
    with pytest.raises(ObserverStiffnessError):
        hgo_step(HgoState(), 0.0, 0.0, coeffs, HgoConfig(eps=0.05), 0.02)


def test_symmetric_vehicle_is_estimated():
    balanced = VehicleParams(m=2540.0, J=5000.0, L_f=1.5, L_r=1.5, C_f=200e3, C_r=200e3)
    coeffs = dyn_coeffs(balanced, 10.0)
    assert coeffs.a21 == 0.0
    phi = 0.02
    A, B = coeffs.matrices()
    beta_ss, r_ss = np.linalg.solve(A, -B * phi)
    state = HgoState()
    for _ in range(300):
        state = hgo_advance(state, r_ss, phi, coeffs, HgoConfig(eps=0.05), 0.01)
    assert state.r_hat == pytest.approx(r_ss, abs=1e-9)
    assert state.beta_hat == pytest.approx(beta_ss, abs=1e-9)


def test_injection_uses_plain_gains(coeffs):
    cfg = HgoConfig(eps=0.05)
    base = hgo_rhs(HgoState(), 0.0, 0.0, coeffs, cfg)
    kicked = hgo_rhs(HgoState(), 0.01, 0.0, coeffs, cfg)
    assert kicked[0] - base[0] == pytest.approx(cfg.h1 * 0.01)
    assert abs(kicked[1] - base[1]) == pytest.approx(cfg.h2 * 0.01)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.02])
def test_error_dynamics_are_stable(coeffs, eps):
    assert np.all(np.linalg.eigvals(error_dynamics_matrix(coeffs, HgoConfig(eps=eps))).real < 0)


def test_substeps(coeffs):
    assert observer_substeps(coeffs, HgoConfig(eps=0.05), 0.01) == 1
    assert observer_substeps(coeffs, HgoConfig(eps=0.005), 0.01) == 10


def test_estimates_converge_on_exact_model(coeffs):
    phi = 0.02
    A, B = coeffs.matrices()
    beta_ss, r_ss = np.linalg.solve(A, -B * phi)
    state = HgoState()
    cfg = HgoConfig(eps=0.05)
    for _ in range(300):
        state = hgo_advance(state, r_ss, phi, coeffs, cfg, 0.01)
    assert state.r_hat == pytest.approx(r_ss, abs=1e-9)
    assert state.beta_hat == pytest.approx(beta_ss, abs=1e-9)


def test_peaking_metric_uses_the_initial_window():
    columns = ("t", "beta", "beta_hat", "r_kin", "r_kin_raw", "r_threshold", "sat_rkin")
    data = np.array([
        [0.0, 0.00, 0.00, 0.0, 0.0, 0.3, 0.0],
        [0.5, 0.05, 0.40, 0.1, 0.1, 0.3, 0.0],
        [1.0, 0.10, 0.20, 0.3, 2.0, 0.3, 1.0],
        [1.5, 0.05, 0.10, 0.2, 0.2, 0.3, 0.0],
        [2.5, 0.05, 5.00, 0.9, 9.0, 0.3, 1.0],
    ])
    report = peaking_metric(SimTrace(columns, data), window=2.0)
    assert report.beta_hat_peak == pytest.approx(0.4)
    assert report.beta_overshoot == pytest.approx(0.3)
    assert report.r_kin_raw_peak == pytest.approx(2.0)
    assert report.clipping_engaged
    assert report.r_kin_within_threshold


def test_peaking_metric_needs_samples():
    with pytest.raises(ParameterError):
        peaking_metric(SimTrace(("t",), np.zeros((0, 1))))
