import logging
import math
from dataclasses import dataclass

import numpy as np

import config
from core.exceptions import InfeasibleGainsError, ParameterError
from core.vehicle import PHI_MAX, DynCoeffs, dyn_coeffs, kappa_max

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DynGains:
    K_p1: float
    K_i1: float
    K_p2: float
    K_i2: float

    def __post_init__(self):
        if self.K_i1 <= 0 or self.K_i2 <= 0:
            raise ParameterError("integral gains K_i1 and K_i2 must be positive")

    def validate(self, params, speeds):
        """Checks K_p1 > |a22| and K_p2 > |a22| at every speed of the operating range."""
        worst = max(abs(dyn_coeffs(params, v).a22) for v in speeds)
        if self.K_p1 <= worst or self.K_p2 <= worst:
            raise ParameterError(f"K_p1={self.K_p1:.3f} and K_p2={self.K_p2:.3f} must exceed |a22|={worst:.3f}")
        return worst

    @classmethod
    def from_dict(cls, values: dict) -> "DynGains":
        return cls(**{k: float(v) for k, v in values.items()})


@dataclass
class DynCtlState:
    sigma_r: float = 0.0
    sigma_phi: float = 0.0
    r_e: float = 0.0
    phi_e: float = 0.0
    phi_des: float = 0.0


@dataclass(frozen=True)
class DynCommand:
    phi_des: float
    omega: float
    omega_raw: float
    r_e: float
    phi_e: float
    r_e_dot: float
    phi_saturated: bool
    omega_saturated: bool


def desired_steering(beta_hat: float, r_kin: float, r_dot_kin: float, r_dyn_hat: float, state: DynCtlState,
                     coeffs: DynCoeffs, gains: DynGains):
    """
    Steering angle that makes the yaw-rate error decay with the PI error dynamics.

    Returns (phi_des, phi_des_raw); the first is clamped to the steering range.
    """
    if coeffs.b21 == 0:
        raise ParameterError("b21 must be nonzero")
    r_e = r_kin - r_dyn_hat
    raw = -(coeffs.a21 * beta_hat - r_dot_kin + coeffs.a22 * r_kin
            - gains.K_p1 * r_e - gains.K_i1 * state.sigma_r) / coeffs.b21
    return float(np.clip(raw, -PHI_MAX, PHI_MAX)), raw


def yaw_error_rate(r_e: float, sigma_r: float, phi_e: float, coeffs: DynCoeffs, gains: DynGains) -> float:
    """Internal model of the yaw-rate error dynamics under the desired steering law."""
    return (coeffs.a22 - gains.K_p1) * r_e - gains.K_i1 * sigma_r + coeffs.b21 * phi_e


def steering_rate(beta_hat_dot: float, r_dot_kin: float, r_ddot_kin: float, r_e: float, r_e_dot: float,
                  phi_e: float, state: DynCtlState, coeffs: DynCoeffs, gains: DynGains):
    """
    Backstepping steering-rate law; returns (omega, omega_raw) with omega clamped.

    omega = dphi_des/dt + r_e + K_p2 phi_e + K_i2 sigma_phi, where dphi_des/dt is
    expanded analytically from the desired steering law. The unit cross term is the
    -(K_i1 + b21) r_e / b21 group of the expanded law.
    """
    if coeffs.b21 == 0:
        raise ParameterError("b21 must be nonzero")
    phi_des_dot = -(coeffs.a21 * beta_hat_dot + coeffs.a22 * r_dot_kin - r_ddot_kin
                    - gains.K_p1 * r_e_dot - gains.K_i1 * r_e) / coeffs.b21
    raw = phi_des_dot + r_e + gains.K_p2 * phi_e + gains.K_i2 * state.sigma_phi
    return float(np.clip(raw, -config.OMEGA_MAX, config.OMEGA_MAX)), raw


def composite_lyapunov(r_e: float, sigma_r: float, phi_e: float, sigma_phi: float, coeffs: DynCoeffs,
                       gains: DynGains) -> float:
    """Yaw-loop energy plus the steering-loop energy weighted by b21."""
    return 0.5 * (gains.K_i1 * sigma_r ** 2 + r_e ** 2
                  + coeffs.b21 * (phi_e ** 2 + gains.K_i2 * sigma_phi ** 2))


def composite_lyapunov_rate(r_e: float, phi_e: float, coeffs: DynCoeffs, gains: DynGains) -> float:
    return -(gains.K_p1 - coeffs.a22) * r_e ** 2 - coeffs.b21 * gains.K_p2 * phi_e ** 2


def tune_dyn_gains(params, speed_range, T_s_target: float = config.DYN_STEER_SETTLING,
                   design_speed: float = config.DYN_DESIGN_SPEED) -> DynGains:
    """
    Critically damped PI pole placement for both dynamic loops.

    The steering loop s^2 + K_p2 s + K_i2 targets the natural frequency 4/T_s and the
    yaw loop s^2 + (K_p1 - a22) s + K_i1 half of it. Each frequency is raised until the
    proportional gain clears max|a22| over the speed range by twice its target, so
    K_p1, K_p2 > |a22| at every operating speed. The yaw pair is placed at the speed
    with the least natural yaw damping; slower speeds are overdamped.
    """
    lo, hi = speed_range
    if lo < params.v_eps - 1e-12 or hi > 40.0 or lo > hi:
        raise ParameterError(f"speed range {speed_range} must lie within [v_eps, 40] m/s")
    if T_s_target <= 0:
        raise ParameterError("settling target must be positive")
    steer_target = 4.0 / T_s_target
    yaw_target = steer_target / 2.0
    speeds = np.linspace(lo, hi, 50)
    a22 = [dyn_coeffs(params, v).a22 for v in speeds]
    a22_top = max(a22)
    a22_abs = max(abs(a) for a in a22)

    peak_rate = params.wheelbase * kappa_max(design_speed, params.v_eps) * steer_target / math.e
    if peak_rate > config.OMEGA_MAX:
        raise InfeasibleGainsError(
            f"steering loop with T_s={T_s_target}s needs {peak_rate:.3f} rad/s at {design_speed} m/s, "
            f"limit is {config.OMEGA_MAX} rad/s")

    omega_yaw = yaw_target + (a22_abs - a22_top) / 2.0
    omega_steer = steer_target + a22_abs / 2.0
    gains = DynGains(K_p1=2.0 * omega_yaw + a22_top, K_i1=omega_yaw ** 2,
                     K_p2=2.0 * omega_steer, K_i2=omega_steer ** 2)
    gains.validate(params, speeds)
    logger.info(f"[Dynamic Controller] ✅ Tuned K_p1={gains.K_p1:.3f} K_i1={gains.K_i1:.3f} "
                f"K_p2={gains.K_p2:.3f} K_i2={gains.K_i2:.3f} over {lo:g}-{hi:g} m/s")
    return gains


class DynamicController:
    """
    Yaw-tracking and backstepping steering tier for one run.

    Integrators advance by forward Euler over the control period and freeze while
    the command they feed is saturated.
    """

    def __init__(self, gains: DynGains):
        self.gains = gains
        self.state = DynCtlState()

    def step(self, dt: float, coeffs: DynCoeffs, beta_hat: float, beta_hat_dot: float, r_hat: float,
             phi_act: float, r_kin: float, r_dot_kin: float, r_ddot_kin: float) -> DynCommand:
        s = self.state
        r_e = r_kin - r_hat
        phi_des, phi_raw = desired_steering(beta_hat, r_kin, r_dot_kin, r_hat, s, coeffs, self.gains)
        phi_e = phi_des - phi_act
        r_e_dot = yaw_error_rate(r_e, s.sigma_r, phi_e, coeffs, self.gains)
        omega, omega_raw = steering_rate(beta_hat_dot, r_dot_kin, r_ddot_kin, r_e, r_e_dot, phi_e, s, coeffs,
                                         self.gains)
        phi_sat = phi_raw != phi_des
        omega_sat = omega_raw != omega
        if not phi_sat:
            s.sigma_r += dt * r_e
        if not omega_sat:
            s.sigma_phi += dt * phi_e
        s.r_e, s.phi_e, s.phi_des = r_e, phi_e, phi_des
        return DynCommand(phi_des, omega, omega_raw, r_e, phi_e, r_e_dot, phi_sat, omega_sat)
