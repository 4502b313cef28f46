"""
Comparison controllers: a cascaded PID pair ("A") and a non-slip sliding-mode
controller with proportional dynamic tiers ("B").
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

import config
from core.error_model import ErrorState
from core.exceptions import ParameterError
from core.kinematic_controller import KinGains, c_ramp
from core.vehicle import PHI_MAX, DynCoeffs, VehicleParams, dyn_coeffs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineAGains:
    kin_kp: float
    kin_ki: float
    kin_kd: float
    dyn_kp: float
    dyn_ki: float
    dyn_kd: float = 0.0
    deriv_tau: float = config.BASELINE_A_DERIV_TAU

    def __post_init__(self):
        if min(self.kin_kp, self.kin_ki, self.kin_kd, self.dyn_kp, self.dyn_ki, self.dyn_kd) < 0:
            raise ParameterError("baseline A gains must be non-negative")
        if self.deriv_tau <= 0:
            raise ParameterError("derivative filter constant must be positive")

    @classmethod
    def from_dict(cls, values: dict) -> "BaselineAGains":
        return cls(**{k: float(v) for k, v in values.items()})


def critical_settling_frequency(T_s: float, band: float = 0.02) -> float:
    """Natural frequency whose critically damped step response settles within band after T_s."""
    x = brentq(lambda z: (1.0 + z) * math.exp(-z) - band, 1.0, 20.0)
    return x / T_s


def steady_yaw_gain(params: VehicleParams, v: float) -> float:
    """Steady-state yaw rate per unit steering angle of the linear model."""
    A, B = dyn_coeffs(params, v).matrices()
    return float(np.linalg.solve(A, -B)[1])


def tune_baseline_a(params: VehicleParams, tune_speed: float = config.BASELINE_A_TUNE_SPEED,
                    T_s: float = config.BASELINE_A_SETTLING,
                    inner_T_s: float = config.BASELINE_A_INNER_SETTLING,
                    inner_speed: float = 10.0) -> BaselineAGains:
    """
    Critically damped cascade tuning.

    The outer loop is placed on the lateral error double integrator at tune_speed,
    with the integral zero a decade below the loop frequency. The inner loop is
    placed on the first-order yaw response to steering at inner_speed, twice as fast.
    """
    w = critical_settling_frequency(T_s)
    v = max(tune_speed, params.v_eps)
    kin_kp = w ** 2 / v
    kin_kd = 2.0 * w / v
    kin_ki = kin_kp * w / 10.0
    w_i = critical_settling_frequency(inner_T_s)
    G = steady_yaw_gain(params, inner_speed)
    gains = BaselineAGains(kin_kp=kin_kp, kin_ki=kin_ki, kin_kd=kin_kd,
                           dyn_kp=2.0 * w_i / G, dyn_ki=w_i ** 2 / G, dyn_kd=0.0)
    logger.info(f"[Baseline A] ✅ Tuned outer ({kin_kp:.3f}, {kin_ki:.4f}, {kin_kd:.3f}) "
                f"inner ({gains.dyn_kp:.3f}, {gains.dyn_ki:.3f})")
    return gains


@dataclass
class BaselineAState:
    sigma_r: float = 0.0
    e_prev: float | None = None
    d_filtered: float = 0.0


def baseline_a_step(err: ErrorState, r_meas: float, phi_act: float, gains: BaselineAGains, dt: float,
                    state: BaselineAState, v: float, wheelbase: float, v_eps: float = 0.5):
    """
    Cascaded PID step; returns (omega, r_cmd).

    Outer: r_cmd = kappa v + kp y_e + ki sigma_k + kd v sin(theta_e), clamped to the
    kinematic steering limit. Inner: PID on r_cmd - r_meas with a filtered derivative.
    """
    if dt <= 0:
        raise ParameterError("baseline A needs dt > 0")
    v_bar = max(v, v_eps)
    r_limit = v_bar * math.tan(PHI_MAX) / wheelbase
    r_cmd = (err.kappa_ref * v_bar + gains.kin_kp * err.y_e + gains.kin_ki * err.sigma_k
             + gains.kin_kd * v_bar * math.sin(err.theta_e))
    r_cmd = float(np.clip(r_cmd, -r_limit, r_limit))

    e = r_cmd - r_meas
    if state.e_prev is not None:
        alpha = dt / (gains.deriv_tau + dt)
        state.d_filtered += alpha * ((e - state.e_prev) / dt - state.d_filtered)
    state.e_prev = e
    raw = gains.dyn_kp * e + gains.dyn_ki * state.sigma_r + gains.dyn_kd * state.d_filtered
    omega = float(np.clip(raw, -config.OMEGA_MAX, config.OMEGA_MAX))
    pushing_limit = (phi_act >= PHI_MAX and omega > 0) or (phi_act <= -PHI_MAX and omega < 0)
    if omega == raw and not pushing_limit:
        state.sigma_r += dt * e
    return omega, r_cmd


class BaselineAController:
    def __init__(self, gains: BaselineAGains, model_params: VehicleParams):
        self.gains = gains
        self.params = model_params
        self.state = BaselineAState()

    def step(self, err: ErrorState, r_meas: float, phi_act: float, v: float, dt: float):
        return baseline_a_step(err, r_meas, phi_act, self.gains, dt, self.state, v,
                               self.params.wheelbase, self.params.v_eps)


@dataclass(frozen=True)
class BaselineBGains:
    kin: KinGains = field(default_factory=lambda: KinGains(eps_kin=config.BASELINE_B_EPS_KIN))
    K_p1: float = 60.0
    K_p2: float = 8.0

    @classmethod
    def from_dict(cls, values: dict) -> "BaselineBGains":
        values = dict(values)
        kin_values = dict(values.pop("kinematic", {}))
        preset = config.KIN_PRESETS.get(kin_values.get("preset"), {})
        if "eps_kin" not in kin_values and "eps_kin" not in preset:
            kin_values["eps_kin"] = config.BASELINE_B_EPS_KIN
        kin = KinGains.from_dict(kin_values)
        return cls(kin=kin, **{k: float(v) for k, v in values.items()})


@dataclass
class BaselineBState:
    r_ref_prev: float | None = None
    r_ref: float = 0.0
    r_ref_dot: float = 0.0
    S_kin: float = 0.0
    rho_kin: float = 0.0
    phi_des: float = 0.0
    r_e: float = 0.0
    phi_e: float = 0.0


def baseline_b_kinematic(err: ErrorState, gains: KinGains, c: float, c_dot: float, v_bar: float):
    """
    Non-slip manifold law in its own error frame; returns (r_kin, S_kin, rho_kin).

    The frame measures y and sigma positive left of the path and the heading error
    as theta - theta_ref, so all three flip sign against ErrorState. S_kin and the
    returned yaw rate are then in vehicle terms again: S_kin > 0 asks for a right
    turn. The curvature feedforward sits inside rho_kin.
    """
    theta_b = -err.theta_e
    y_b = -err.y_e
    sigma_b = -err.sigma_k
    u = float(np.clip((c * y_b + gains.K_i * sigma_b) / v_bar, -gains.a1, gains.a1))
    S = math.asin(u) + theta_b
    inner = (c_dot * y_b / v_bar + c * math.sin(theta_b) + gains.K_i * y_b / v_bar) / math.sqrt(1.0 - u * u)
    rho = abs(-err.kappa_ref * v_bar + inner)
    r_kin = -(rho + gains.psi_kin) * math.tanh(S / gains.eps_kin)
    return r_kin, S, rho


def baseline_b_step(err: ErrorState, r_meas_or_hat: float, phi_act: float, state: BaselineBState,
                    coeffs: DynCoeffs, gains: BaselineBGains, dt: float, t: float, v: float,
                    beta_hat: float = 0.0, v_eps: float = 0.5):
    """
    One step of the non-slip controller; returns (omega, r_kin).

    The dynamic tiers keep their published groupings, including the a22 term acting
    on the reference yaw acceleration. The reference yaw acceleration is the backward
    difference of the kinematic command.
    """
    if dt <= 0:
        raise ParameterError("baseline B needs dt > 0")
    v_bar = max(v, v_eps)
    c, c_dot = c_ramp(gains.kin, t)
    r_ref, S, rho = baseline_b_kinematic(err, gains.kin, c, c_dot, v_bar)
    r_ref_dot = 0.0 if state.r_ref_prev is None else (r_ref - state.r_ref_prev) / dt
    state.r_ref_prev = r_ref

    r_e = r_meas_or_hat - r_ref
    group = coeffs.a21 * beta_hat + coeffs.a22 * r_ref_dot - r_ref_dot
    phi_des = -(group + gains.K_p1 * r_e) / coeffs.b21
    phi_e = phi_act - phi_des
    raw = -(group + gains.K_p1 * r_e + coeffs.b21 * r_e) / coeffs.b21 - gains.K_p2 * phi_e
    omega = float(np.clip(raw, -config.OMEGA_MAX, config.OMEGA_MAX))

    state.r_ref, state.r_ref_dot, state.S_kin, state.rho_kin = r_ref, r_ref_dot, S, rho
    state.phi_des, state.r_e, state.phi_e = phi_des, r_e, phi_e
    return omega, r_ref


class BaselineBController:
    def __init__(self, gains: BaselineBGains, model_params: VehicleParams):
        self.gains = gains
        self.params = model_params
        self.state = BaselineBState()

    def step(self, err: ErrorState, r_meas: float, phi_act: float, coeffs: DynCoeffs, dt: float, t: float,
             v: float, beta_hat: float = 0.0):
        return baseline_b_step(err, r_meas, phi_act, self.state, coeffs, self.gains, dt, t, v, beta_hat,
                               self.params.v_eps)
