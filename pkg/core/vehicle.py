import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import fsolve

import config
from core.exceptions import ParameterError, SingularSpeedError

logger = logging.getLogger(__name__)

PHI_MAX = math.radians(config.PHI_MAX_DEG)

# Index layout of the plant state vector integrated by the simulator.
BETA, R, PHI, X, Y, THETA = range(6)


def wrap_angle(angle):
    """Wraps an angle (scalar or array) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - angle, 2.0 * np.pi)


@dataclass(frozen=True)
class VehicleParams:
    """
    Physical parameter set of the single-track vehicle.

    Args:
        m (float): Mass in kg.
        J (float): Yaw inertia in kg*m^2.
        L_f (float): CG to front axle distance in m.
        L_r (float): CG to rear axle distance in m.
        C_f (float): Front cornering stiffness in N/rad.
        C_r (float): Rear cornering stiffness in N/rad.
        mu (float): Road-tire friction coefficient.
        v_eps (float): Floor speed substituted below which lateral dynamics vanish.
    """
    m: float
    J: float
    L_f: float
    L_r: float
    C_f: float
    C_r: float
    mu: float = 0.8
    v_eps: float = 0.5

    def __post_init__(self):
        for name in ("m", "J", "L_f", "L_r", "C_f", "C_r", "v_eps"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"vehicle parameter '{name}' must be positive, got {value}")
        if not 0 < self.mu <= 1.5:
            raise ParameterError(f"vehicle parameter 'mu' must lie in (0, 1.5], got {self.mu}")

    @property
    def wheelbase(self) -> float:
        return self.L_f + self.L_r

    @classmethod
    def from_dict(cls, values: dict) -> "VehicleParams":
        return cls(**{k: float(v) for k, v in values.items()})

    def with_weather(self, mu: float, stiffness_scale: float) -> "VehicleParams":
        """Returns a copy with friction replaced and both cornering stiffnesses scaled."""
        return replace(self, mu=mu, C_f=self.C_f * stiffness_scale, C_r=self.C_r * stiffness_scale)

    def floor_speed(self, v: float) -> float:
        return max(v, self.v_eps)


@dataclass(frozen=True)
class DynCoeffs:
    a11: float
    a12: float
    a21: float
    a22: float
    b11: float
    b21: float

    def matrices(self):
        """State matrix and input vector of the linear slip-yaw model, state (beta, r)."""
        A = np.array([[self.a11, self.a12], [self.a21, self.a22]])
        B = np.array([self.b11, self.b21])
        return A, B


@dataclass
class PlantState:
    beta: float = 0.0
    r: float = 0.0
    phi: float = 0.0
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.beta, self.r, self.phi, self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, vec, v: float) -> "PlantState":
        return cls(beta=float(vec[BETA]), r=float(vec[R]), phi=float(vec[PHI]),
                   x=float(vec[X]), y=float(vec[Y]), theta=float(wrap_angle(vec[THETA])), v=float(v))


def dyn_coeffs(params: VehicleParams, v: float) -> DynCoeffs:
    """Coefficients of the linear slip-yaw model at speed max(v, v_eps)."""
    vb = params.floor_speed(v)
    m, J = params.m, params.J
    moment = params.C_f * params.L_f - params.C_r * params.L_r
    return DynCoeffs(
        a11=-(params.C_f + params.C_r) / (m * vb),
        a12=-(1.0 + moment / (m * vb ** 2)),
        a21=-moment / J,
        a22=-(params.C_f * params.L_f ** 2 + params.C_r * params.L_r ** 2) / (J * vb),
        b11=params.C_f / (m * vb),
        b21=params.C_f * params.L_f / J,
    )


def linear_slip_yaw_deriv(state: PlantState, coeffs: DynCoeffs, disturbance=(0.0, 0.0)):
    """Returns (beta_dot, r_dot) of the linear slip-yaw model."""
    d_beta, d_r = disturbance
    beta_dot = coeffs.a11 * state.beta + coeffs.a12 * state.r + coeffs.b11 * state.phi + d_beta
    r_dot = coeffs.a21 * state.beta + coeffs.a22 * state.r + coeffs.b21 * state.phi + d_r
    return beta_dot, r_dot


def tire_slip_angles(beta: float, r: float, phi: float, v: float, params: VehicleParams):
    """Geometric front and rear tire slip angles; both zero below the floor speed."""
    if v < params.v_eps:
        return 0.0, 0.0
    u = v * math.cos(beta)
    w = v * math.sin(beta)
    alpha_f = math.atan2(w + params.L_f * r, u) - phi
    alpha_r = math.atan2(w - params.L_r * r, u)
    return alpha_f, alpha_r


def rear_axle_slip(beta: float, r: float, v: float, params: VehicleParams) -> float:
    """Heading of the rear-axle velocity relative to the body axis."""
    return tire_slip_angles(beta, r, 0.0, v, params)[1]


def rear_axle_speed(beta: float, alpha_r: float, v: float) -> float:
    return v * math.cos(beta) / math.cos(alpha_r)


def nonlinear_truth_deriv(state: PlantState, params: VehicleParams, slope_force: float = 0.0,
                          disturbance=(0.0, 0.0)) -> np.ndarray:
    """
    Nonlinear single-track force balance with linear cornering-stiffness tires.

    Returns the derivative of (beta, r, x, y, theta) where (x, y) is the rear-axle
    position. The steering angle is an actuator state and is not differentiated here.
    slope_force is a lateral force in N applied at the CG.
    """
    v = state.v
    vb = params.floor_speed(v)
    alpha_f, alpha_r = tire_slip_angles(state.beta, state.r, state.phi, v, params)
    if v < params.v_eps:
        f_front = f_rear = 0.0
        slope_force = 0.0
    else:
        f_front = -params.C_f * alpha_f
        f_rear = -params.C_r * alpha_r
    lateral = f_front * math.cos(state.phi) + f_rear + slope_force
    beta_dot = lateral / (params.m * vb * math.cos(state.beta)) - state.r + disturbance[0]
    r_dot = (f_front * math.cos(state.phi) * params.L_f - f_rear * params.L_r) / params.J + disturbance[1]

    v_b = rear_axle_speed(state.beta, alpha_r, v)
    course = state.theta + alpha_r
    return np.array([beta_dot, r_dot, v_b * math.cos(course), v_b * math.sin(course), state.r])


def plant_rhs(vec: np.ndarray, v: float, omega: float, params: VehicleParams,
              slope_force: float = 0.0, disturbance=(0.0, 0.0)) -> np.ndarray:
    """Full plant vector field (beta, r, phi, x, y, theta) under steering-rate input omega."""
    state = PlantState.from_array(vec, v)
    body = nonlinear_truth_deriv(state, params, slope_force, disturbance)
    phi_dot = omega
    if (vec[PHI] >= PHI_MAX and omega > 0) or (vec[PHI] <= -PHI_MAX and omega < 0):
        phi_dot = 0.0
    return np.array([body[0], body[1], phi_dot, body[2], body[3], body[4]])


def plant_substeps(params: VehicleParams, v: float, dt: float) -> int:
    """Number of RK4 substeps keeping dt_sub times the fastest tire pole bounded."""
    coeffs = dyn_coeffs(params, v)
    stiffness = abs(coeffs.a11) + abs(coeffs.a22)
    return max(1, math.ceil(dt * stiffness / config.PLANT_STIFFNESS_STEP))


def rk4_step(f, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + dt / 2, x + dt / 2 * k1)
    k3 = f(t + dt / 2, x + dt / 2 * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lateral_acceleration(v: float, beta_dot: float, r: float) -> float:
    """Lateral acceleration of the CG at constant speed."""
    return v * (beta_dot + r)


def resolve_rear_slip(beta: float, params: VehicleParams, v: float) -> float:
    """Linear steady-state relation mapping CG sideslip to rear-axle slip."""
    vb = params.floor_speed(v)
    L = params.wheelbase
    denominator = params.C_r * L * params.L_r / (params.m * vb ** 2 * params.L_f) - 1.0
    if abs(denominator) < 1e-9:
        raise SingularSpeedError(f"rear-slip relation is singular at v={vb:.4f} m/s")
    return -beta / denominator


def steady_sideslip(kappa: float, params: VehicleParams, v: float) -> float:
    """Linear steady-state CG sideslip on a path of curvature kappa."""
    vb = params.floor_speed(v)
    L = params.wheelbase
    return kappa / (params.C_r * L) * (params.C_r * L * params.L_r - params.m * vb ** 2 * params.L_f)


def sideslip_perturbation(kappa: float, params: VehicleParams, v: float) -> float:
    """Mismatch between CG sideslip and rear-axle slip left uncompensated by the controller."""
    vb = params.floor_speed(v)
    L = params.wheelbase
    return kappa / (params.C_r * L) * (params.C_r * L * params.L_r - 2.0 * params.m * vb ** 2 * params.L_f)


def kappa_max(v: float, v_eps: float = 0.5) -> float:
    """Largest comfortable curvature at speed v."""
    vb = max(v, v_eps)
    return min(config.KAPPA_MAX_CAP, config.KAPPA_MAX_ACCEL / vb ** 2)


def steady_cornering(phi: float, v: float, params: VehicleParams):
    """
    Solves the nonlinear plant for the steady (beta, r) at a fixed steering angle.

    Returns (beta_ss, r_ss, kappa) where kappa is the curvature of the rear-axle track.
    """
    def residual(z):
        state = PlantState(beta=z[0], r=z[1], phi=phi, v=v)
        d = nonlinear_truth_deriv(state, params)
        return [d[0], d[1]]

    coeffs = dyn_coeffs(params, v)
    A, B = coeffs.matrices()
    guess = np.linalg.solve(A, -B * phi)
    beta_ss, r_ss = fsolve(residual, guess, xtol=1e-14)
    alpha_r = rear_axle_slip(beta_ss, r_ss, v, params)
    kappa = r_ss / rear_axle_speed(beta_ss, alpha_r, v)
    return float(beta_ss), float(r_ss), float(kappa)
