import logging
import math
from dataclasses import dataclass

import numpy as np

import config
from core.error_model import ErrorState
from core.exceptions import ParameterError

logger = logging.getLogger(__name__)

PROP, PROP_S = "PROP", "PROP-S"


@dataclass(frozen=True)
class KinGains:
    """
    Gains of the sliding-manifold kinematic controller.

    Args:
        c0 (float): Convergence gain at t = 0.
        c_ss (float): Convergence gain after the ramp.
        t_end (float): Ramp duration in seconds.
        K_i (float): Integral gain on the lateral error.
        psi_kin (float): Robustness margin of the reaching law.
        eps_kin (float): Boundary-layer width of the tanh switching term.
        a1 (float): Saturation bound of the arcsin argument.
        k1 (float): Share of friction available for steering.
        k2 (float): Share of the lateral acceleration budget used for error correction.
        K_F (float): Sideslip compensation gain in the heading error.
        r_threshold (float): Upper cap of the yaw-rate saturation.
        c0_mode (str): "fixed" or "manifold" (solve S_kin = 0 at the initial posture).
        enforce_safety (bool): Cap c(t) by the friction bound.
        beta_feedforward (bool): Add K_F * beta_hat to the yaw-rate command.
        mu (float | None): Design friction; the model parameter set's value when None.
    """
    c0: float = config.KIN_C0
    c_ss: float = config.KIN_C_SS
    t_end: float = config.KIN_T_END
    K_i: float = config.KIN_K_I
    psi_kin: float = config.KIN_PSI
    eps_kin: float = config.KIN_EPS
    a1: float = config.KIN_A1
    k1: float = config.KIN_K1
    k2: float = config.KIN_K2
    K_F: float = config.KIN_K_F
    r_threshold: float = config.KIN_R_THRESHOLD_CAP
    c_floor: float = config.KIN_C_FLOOR
    c0_mode: str = "fixed"
    enforce_safety: bool = True
    beta_feedforward: bool = False
    mu: float | None = None

    def __post_init__(self):
        if not 0 < self.a1 < 1:
            raise ParameterError(f"a1 must lie in (0, 1), got {self.a1}")
        if self.psi_kin <= 0 or self.eps_kin <= 0:
            raise ParameterError("psi_kin and eps_kin must be positive")
        if not 0 < self.k2 < 1 or not 0 < self.k1 <= 1:
            raise ParameterError(f"safety fractions out of range: k1={self.k1}, k2={self.k2}")
        if self.c0 <= 0 or self.c_ss <= 0 or self.t_end < 0:
            raise ParameterError("c0 and c_ss must be positive and t_end non-negative")
        if self.K_i < 0 or self.K_i > self.c_ss / 10:
            raise ParameterError(f"K_i={self.K_i} must satisfy 0 <= K_i <= c_ss/10 = {self.c_ss / 10:.4f}")
        if self.c0_mode not in ("fixed", "manifold"):
            raise ParameterError(f"unknown c0 mode '{self.c0_mode}'")

    @classmethod
    def from_dict(cls, values: dict) -> "KinGains":
        values = dict(values)
        preset = values.pop("preset", None)
        if preset is not None:
            if preset not in config.KIN_PRESETS:
                raise ParameterError(f"unknown kinematic preset '{preset}'")
            values = {**config.KIN_PRESETS[preset], **values}
        return cls(**values)


@dataclass(frozen=True)
class GainSchedule:
    c_now: float
    c_dot: float
    c_safe: float
    safety_bound_active: bool = False
    safety_violation: bool = False


@dataclass(frozen=True)
class ManifoldEval:
    S_kin: float
    saturated: bool
    rho_kin: float
    c_now: float
    c_dot: float
    u: float
    numerator: float


@dataclass(frozen=True)
class YawCommand:
    r_kin: float
    r_raw: float
    r_dot: float
    r_ddot: float
    clipped: bool
    r_threshold: float
    threshold_branch: str


def c_ramp(gains: KinGains, t: float, c0: float | None = None):
    """Linear transition from c0 to c_ss over t_end; returns (c, c_dot)."""
    c0 = gains.c0 if c0 is None else c0
    if gains.t_end <= 0 or t >= gains.t_end:
        return gains.c_ss, 0.0
    slope = (gains.c_ss - c0) / gains.t_end
    return c0 + slope * t, slope


def c_safety_bound(gains: KinGains, y_e: float, theta_bar_e: float, v_bar: float, delta_ar: float,
                   mu: float, c_dot: float = 0.0) -> float:
    """Largest convergence gain keeping the commanded lateral acceleration within k1*k2*mu*g."""
    numerator = ((gains.k1 * gains.k2 * mu * config.GRAVITY - abs(v_bar * gains.psi_kin))
                 * math.sqrt(1.0 - gains.a1 ** 2)
                 - abs(gains.K_i * y_e) - abs(c_dot * y_e))
    denominator = abs(v_bar) * (abs(math.sin(theta_bar_e)) + abs(delta_ar))
    if denominator == 0.0:
        return math.inf if numerator > 0 else -math.inf
    return numerator / denominator


def max_k2(kappa: float, v_bar: float, k1: float, mu: float) -> float:
    """Upper bound on k2 reserving (1 - k2) of the acceleration budget for the path curvature."""
    return 1.0 - abs(kappa) * v_bar ** 2 / (k1 * mu * config.GRAVITY)


def schedule_c(gains: KinGains, t: float, err: ErrorState, v: float, params, delta_ar: float,
               c0: float | None = None) -> GainSchedule:
    """
    Hierarchical convergence gain: the ramp capped by the friction safety bound.

    c_dot is the ramp slope while the ramp governs and zero once t_end has passed or
    the safety cap binds.
    """
    v_bar = params.floor_speed(v)
    mu = gains.mu if gains.mu is not None else params.mu
    c_lin, slope = c_ramp(gains, t, c0)
    c_safe = c_safety_bound(gains, err.y_e, err.theta_bar_e, v_bar, delta_ar, mu, slope)
    if not gains.enforce_safety or c_lin <= c_safe:
        return GainSchedule(c_lin, slope, c_safe)
    if c_safe <= 0.0:
        logger.debug(f"[Kinematic Controller] Safety bound {c_safe:.3f} <= 0, flooring c at {gains.c_floor}")
        return GainSchedule(gains.c_floor, 0.0, c_safe, safety_bound_active=True, safety_violation=True)
    return GainSchedule(max(c_safe, gains.c_floor), 0.0, c_safe, safety_bound_active=True)


def select_c0(gains: KinGains, y_e: float, theta_bar_e: float, sigma_k: float, v_bar: float) -> float:
    """
    Initial convergence gain.

    The manifold mode places the initial posture on S_kin = 0, which is only possible
    when y_e and theta_bar_e have opposite signs or theta_bar_e is zero; any other
    posture falls back to the fixed c0.
    """
    if gains.c0_mode == "fixed" or abs(y_e) < 1e-9:
        return gains.c0
    if y_e * theta_bar_e > 0:
        logger.info("[Kinematic Controller] Initial posture in quadrant I/III, using fixed c0")
        return gains.c0
    c0 = -(v_bar * math.sin(theta_bar_e) + gains.K_i * sigma_k) / y_e
    return max(c0, 1e-3)


def settling_estimates(c_now: float, v_bar: float):
    """98% settling time and distance on the manifold."""
    if c_now <= 0:
        raise ParameterError("settling estimates need c > 0")
    T_s = 4.0 / c_now
    return T_s, v_bar * T_s


def _manifold_terms(y, theta_bar, sigma, c, c_dot, v_bar, delta_ar, gains: KinGains):
    u_raw = (c * y + gains.K_i * sigma) / v_bar
    u = float(np.clip(u_raw, -gains.a1, gains.a1))
    saturated = abs(u_raw) > gains.a1
    S = theta_bar + math.asin(u)
    numerator = c_dot * y + c * v_bar * math.sin(theta_bar) - c * v_bar * delta_ar + gains.K_i * y
    root = math.sqrt(1.0 - u * u)
    rho = abs(numerator) / (v_bar * root)
    return S, saturated, rho, u, numerator, root


def eval_manifold(err: ErrorState, gains: KinGains, c_now: float, c_dot: float, v_bar: float,
                  delta_ar: float) -> ManifoldEval:
    S, saturated, rho, u, numerator, _ = _manifold_terms(
        err.y_e, err.theta_bar_e, err.sigma_k, c_now, c_dot, v_bar, delta_ar, gains)
    return ManifoldEval(S_kin=S, saturated=saturated, rho_kin=rho, c_now=c_now, c_dot=c_dot,
                        u=u, numerator=numerator)


def r_threshold(gains: KinGains, v_bar: float, mu: float):
    """Yaw-rate saturation level and which branch binds."""
    friction = gains.k1 * gains.k2 * mu * config.GRAVITY / v_bar
    if friction < gains.r_threshold:
        return friction, "friction"
    return gains.r_threshold, "cap"


def raw_yaw_rate(y, theta_bar, sigma, kappa, c, c_dot, v_bar, delta_ar, gains: KinGains) -> float:
    S, _, rho, _, _, _ = _manifold_terms(y, theta_bar, sigma, c, c_dot, v_bar, delta_ar, gains)
    return kappa * v_bar + (rho + gains.psi_kin) * math.tanh(S / gains.eps_kin)


def _yaw_rate_derivatives(y, theta_bar, sigma, kappa, kappa_slope, c, c_dot, v_bar, v_dot, delta_ar,
                          gains: KinGains):
    """
    Raw yaw-rate command and its first two time derivatives along the design model.

    Design model: dy/dt = v(sin theta_bar - delta_ar), dsigma/dt = y,
    dtheta_bar/dt = kappa v - r_kin, dkappa/dt = kappa' v, with c_ddot = 0, v_ddot = 0
    and a slowly varying delta_ar.
    """
    S, saturated, rho, u, N, root = _manifold_terms(y, theta_bar, sigma, c, c_dot, v_bar, delta_ar, gains)
    eps, K = gains.eps_kin, gains.K_i
    sin_t, cos_t = math.sin(theta_bar), math.cos(theta_bar)
    T = math.tanh(S / eps)
    gain = rho + gains.psi_kin
    r = kappa * v_bar + gain * T

    y_dot = v_bar * (sin_t - delta_ar)
    theta_dot = -gain * T
    y_ddot = v_dot * (sin_t - delta_ar) + v_bar * cos_t * theta_dot

    if saturated:
        u_dot = u_ddot = 0.0
    else:
        P = c_dot * y + c * y_dot + K * y
        P_dot = 2.0 * c_dot * y_dot + c * y_ddot + K * y_dot
        u_dot = P / v_bar - u * v_dot / v_bar
        u_ddot = (P_dot / v_bar - P * v_dot / v_bar ** 2 - u_dot * v_dot / v_bar
                  + u * v_dot ** 2 / v_bar ** 2)
    root_dot = -u * u_dot / root
    root_ddot = -(u_dot ** 2 + u * u_ddot) / root - u ** 2 * u_dot ** 2 / root ** 3

    S_dot = theta_dot + u_dot / root
    N_dot = (c_dot * y_dot + c_dot * v_bar * sin_t + c * v_dot * sin_t + c * v_bar * cos_t * theta_dot
             - c_dot * v_bar * delta_ar - c * v_dot * delta_ar + K * y_dot)
    D = v_bar * root
    D_dot = v_dot * root + v_bar * root_dot
    sign = math.copysign(1.0, N) if N != 0.0 else math.copysign(1.0, N_dot)
    rho_dot = sign * (N_dot / D - N * D_dot / D ** 2)
    T_dot = (1.0 - T * T) * S_dot / eps
    theta_ddot = -(rho_dot * T + gain * T_dot)
    r_dot = kappa_slope * v_bar ** 2 + kappa * v_dot + rho_dot * T + gain * T_dot

    S_ddot = theta_ddot + u_ddot / root + u * u_dot ** 2 / root ** 3
    N_ddot = (c_dot * y_ddot + 2.0 * c_dot * v_dot * sin_t + 2.0 * c_dot * v_bar * cos_t * theta_dot
              + 2.0 * c * v_dot * cos_t * theta_dot - c * v_bar * sin_t * theta_dot ** 2
              + c * v_bar * cos_t * theta_ddot - 2.0 * c_dot * v_dot * delta_ar + K * y_ddot)
    D_ddot = 2.0 * v_dot * root_dot + v_bar * root_ddot
    rho_ddot = sign * (N_ddot / D - 2.0 * N_dot * D_dot / D ** 2 - N * D_ddot / D ** 2
                       + 2.0 * N * D_dot ** 2 / D ** 3)
    T_ddot = (1.0 - T * T) * S_ddot / eps - 2.0 * T * T_dot * S_dot / eps
    r_ddot = 3.0 * kappa_slope * v_bar * v_dot + rho_ddot * T + 2.0 * rho_dot * T_dot + gain * T_ddot
    return r, r_dot, r_ddot


def raw_yaw_rate_dot(y, theta_bar, sigma, kappa, kappa_slope, c, c_dot, v_bar, v_dot, delta_ar,
                     gains: KinGains) -> float:
    return _yaw_rate_derivatives(y, theta_bar, sigma, kappa, kappa_slope, c, c_dot, v_bar, v_dot, delta_ar,
                                 gains)[1]


def raw_yaw_rate_ddot(y, theta_bar, sigma, kappa, kappa_slope, c, c_dot, v_bar, v_dot, delta_ar,
                      gains: KinGains) -> float:
    return _yaw_rate_derivatives(y, theta_bar, sigma, kappa, kappa_slope, c, c_dot, v_bar, v_dot, delta_ar,
                                 gains)[2]


def yaw_command(evaluation: ManifoldEval, err: ErrorState, gains: KinGains, kappa_ref: float, v_bar: float,
                mode: str = PROP, mu: float = config.NOMINAL_VEHICLE["mu"], delta_ar: float = 0.0,
                v_dot: float = 0.0, beta_hat: float = 0.0) -> YawCommand:
    """
    Kinematic yaw-rate command with its first two time derivatives.

    PROP returns the raw command; PROP-S clips it at r_threshold and reports zero
    derivatives while clipped. Inputs within the threshold pass through unchanged.
    """
    r_raw = kappa_ref * v_bar + (evaluation.rho_kin + gains.psi_kin) * math.tanh(evaluation.S_kin / gains.eps_kin)
    if gains.beta_feedforward:
        r_raw += gains.K_F * beta_hat
    thr, branch = r_threshold(gains, v_bar, gains.mu if gains.mu is not None else mu)
    if mode == PROP_S and abs(r_raw) > thr:
        return YawCommand(math.copysign(thr, r_raw), r_raw, 0.0, 0.0, True, thr, branch)
    _, r_dot, r_ddot = _yaw_rate_derivatives(err.y_e, err.theta_bar_e, err.sigma_k, kappa_ref, err.kappa_slope,
                                             evaluation.c_now, evaluation.c_dot, v_bar, v_dot, delta_ar, gains)
    return YawCommand(r_raw, r_raw, r_dot, r_ddot, False, thr, branch)


def steering_rate_from_yaw(r_kin: float, r_dot: float, v_bar: float, wheelbase: float) -> float:
    """Steering rate realising r_dot for a non-slipping bicycle."""
    return r_dot * v_bar * wheelbase / (v_bar ** 2 + r_kin ** 2 * wheelbase ** 2)


def steering_saturation_region(gains: KinGains, v_bar: float, y_grid, theta_grid, c: float,
                               wheelbase: float, omega_max: float = config.OMEGA_MAX):
    """
    Marks the (y_e, theta_e) postures whose kinematic command needs at most omega_max.

    Evaluated for convergence toward a straight path with sigma_k = 0, c_dot = 0 and
    no sideslip. Returns (mask, omega) with rows indexed by theta and columns by y.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    omega = np.zeros((theta_grid.size, y_grid.size))
    for i, theta in enumerate(theta_grid):
        for j, y in enumerate(y_grid):
            r = raw_yaw_rate(y, theta, 0.0, 0.0, c, 0.0, v_bar, 0.0, gains)
            r_dot = raw_yaw_rate_dot(y, theta, 0.0, 0.0, 0.0, c, 0.0, v_bar, 0.0, 0.0, gains)
            omega[i, j] = steering_rate_from_yaw(r, r_dot, v_bar, wheelbase)
    return np.abs(omega) <= omega_max, omega


def kinematic_loop_rhs(z, gains: KinGains, c: float, v_bar: float, kappa: float = 0.0, delta_ar: float = 0.0,
                       mode: str = PROP, mu: float = config.NOMINAL_VEHICLE["mu"]) -> np.ndarray:
    """
    Closed kinematic loop with ideal yaw tracking, state z = (theta_bar_e, y_e, sigma_k).

    The vehicle follows r_kin exactly and the reference advances at v_bar. The
    lateral rate uses the same small-slip form v(sin theta_bar - delta_ar) as the
    command derivatives.
    """
    theta_bar, y, sigma = z
    r = raw_yaw_rate(y, theta_bar, sigma, kappa, c, 0.0, v_bar, delta_ar, gains)
    if mode == PROP_S:
        thr, _ = r_threshold(gains, v_bar, mu)
        r = float(np.clip(r, -thr, thr))
    return np.array([kappa * v_bar - r, v_bar * (math.sin(theta_bar) - delta_ar), y])


class KinematicController:
    """
    Stateful wrapper running the schedule, manifold and yaw command for one run.

    Holds the selected c0 and counts safety-bound activations.
    """

    def __init__(self, gains: KinGains, model_params, mode: str = PROP):
        self.gains = gains
        self.params = model_params
        self.mode = mode
        self.c0 = gains.c0
        self.safety_violations = 0
        self.threshold_branch = None

    def initialise(self, err: ErrorState, v: float):
        v_bar = self.params.floor_speed(v)
        self.c0 = select_c0(self.gains, err.y_e, err.theta_bar_e, err.sigma_k, v_bar)
        c0_label = "manifold-aligned" if self.gains.c0_mode == "manifold" else "fixed"
        logger.info(f"[Kinematic Controller] 🟢 {self.mode} ready, {c0_label} c0={self.c0:.4f}, c_ss={self.gains.c_ss}")

    def step(self, t: float, err: ErrorState, v: float, v_dot: float, delta_ar: float, beta_hat: float = 0.0):
        v_bar = self.params.floor_speed(v)
        schedule = schedule_c(self.gains, t, err, v, self.params, delta_ar, self.c0)
        if schedule.safety_violation:
            self.safety_violations += 1
        evaluation = eval_manifold(err, self.gains, schedule.c_now, schedule.c_dot, v_bar, delta_ar)
        command = yaw_command(evaluation, err, self.gains, err.kappa_ref, v_bar, self.mode, self.params.mu,
                              delta_ar, v_dot, beta_hat)
        if command.threshold_branch != self.threshold_branch:
            logger.debug(f"[Kinematic Controller] r_threshold branch '{command.threshold_branch}' "
                         f"binds at {command.r_threshold:.3f} rad/s")
            self.threshold_branch = command.threshold_branch
        return schedule, evaluation, command
