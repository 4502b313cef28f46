import logging
import math
from dataclasses import dataclass

import numpy as np

import config
from core.exceptions import ObserverStiffnessError, ParameterError
from core.vehicle import DynCoeffs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HgoConfig:
    alpha1: float = config.HGO_ALPHA1
    alpha2: float = config.HGO_ALPHA2
    eps: float = config.HGO_EPS

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ParameterError("observer gains alpha1 and alpha2 must be positive")
        if not 0 < self.eps <= config.HGO_EPS_MAX:
            raise ParameterError(f"observer eps must lie in (0, {config.HGO_EPS_MAX}], got {self.eps}")

    @property
    def h1(self) -> float:
        return self.alpha1 / self.eps

    @property
    def h2(self) -> float:
        return self.alpha2 / self.eps ** 2

    def sideslip_gain(self, coeffs: DynCoeffs) -> float:
        """h2 with the sign of a21; a symmetric vehicle (a21 = 0) takes +h2."""
        return self.h2 if coeffs.a21 >= 0.0 else -self.h2

    @classmethod
    def from_dict(cls, values: dict) -> "HgoConfig":
        return cls(**{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class HgoState:
    r_hat: float = 0.0
    beta_hat: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.r_hat, self.beta_hat])


def hgo_rhs(state: HgoState, y_meas: float, phi: float, coeffs: DynCoeffs, cfg: HgoConfig):
    """
    Observer vector field: the linear slip-yaw model plus output injection.

    Both states take the same yaw-rate innovation with gains h1 and h2. The
    sideslip gain carries the sign of a21: with a21 < 0 a positive h2 closes
    the r-beta loop with negative determinant. When a21 = 0 sideslip does not
    feed the yaw rate and its estimate converges open loop at rate a11.
    """
    innovation = y_meas - state.r_hat
    r_dot = coeffs.a21 * state.beta_hat + coeffs.a22 * state.r_hat + coeffs.b21 * phi + cfg.h1 * innovation
    beta_dot = (coeffs.a11 * state.beta_hat + coeffs.a12 * state.r_hat + coeffs.b11 * phi
                + cfg.sideslip_gain(coeffs) * innovation)
    return r_dot, beta_dot


def hgo_step(state: HgoState, y_meas: float, phi_cmd: float, coeffs: DynCoeffs, cfg: HgoConfig,
             dt: float) -> HgoState:
    """One RK4 step of the observer with measurement and steering held over dt."""
    if dt > cfg.eps / 5.0 + 1e-15:
        raise ObserverStiffnessError(f"observer step {dt:.4g}s exceeds eps/5 = {cfg.eps / 5.0:.4g}s")

    def f(z):
        return np.array(hgo_rhs(HgoState(z[0], z[1]), y_meas, phi_cmd, coeffs, cfg))

    z = state.as_array()
    k1 = f(z)
    k2 = f(z + dt / 2 * k1)
    k3 = f(z + dt / 2 * k2)
    k4 = f(z + dt * k3)
    z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return HgoState(float(z[0]), float(z[1]))


def observer_substeps(coeffs: DynCoeffs, cfg: HgoConfig, dt: float) -> int:
    """Substeps resolving both the eps-fast injection and the model's own poles."""
    fast = math.ceil(5.0 * dt / cfg.eps - 1e-9)
    stiff = math.ceil(dt * (abs(coeffs.a11) + abs(coeffs.a22)) / config.PLANT_STIFFNESS_STEP)
    return max(1, fast, stiff)


def hgo_advance(state: HgoState, y_meas: float, phi_cmd: float, coeffs: DynCoeffs, cfg: HgoConfig,
                dt: float, refine: int = 1) -> HgoState:
    """Advances the observer over one control period; refine multiplies the substep count."""
    n = observer_substeps(coeffs, cfg, dt) * refine
    for _ in range(n):
        state = hgo_step(state, y_meas, phi_cmd, coeffs, cfg, dt / n)
    return state


def scaled_error_matrix(cfg: HgoConfig) -> np.ndarray:
    """High-gain part of the estimation-error dynamics, with eigenvalues roots(s^2 + alpha1 s + alpha2)/eps."""
    return np.array([[-cfg.h1, 1.0], [-cfg.h2, 0.0]])


def error_dynamics_matrix(coeffs: DynCoeffs, cfg: HgoConfig) -> np.ndarray:
    """Full linear estimation-error dynamics in (r_tilde, beta_tilde) coordinates."""
    return np.array([
        [coeffs.a22 - cfg.h1, coeffs.a21],
        [coeffs.a12 - cfg.sideslip_gain(coeffs), coeffs.a11],
    ])


def characteristic_roots(cfg: HgoConfig) -> np.ndarray:
    return np.roots([1.0, cfg.alpha1, cfg.alpha2])


def steady_estimation_error(coeffs: DynCoeffs, cfg: HgoConfig, delta_beta: float = 0.0, delta_r: float = 0.0):
    """Steady (r_tilde, beta_tilde) under constant unmodelled disturbances."""
    r_tilde, beta_tilde = np.linalg.solve(error_dynamics_matrix(coeffs, cfg), [-delta_r, -delta_beta])
    return float(r_tilde), float(beta_tilde)


@dataclass(frozen=True)
class PeakingReport:
    beta_hat_peak: float
    beta_peak: float
    beta_overshoot: float
    r_kin_peak: float
    r_kin_raw_peak: float
    clipping_engaged: bool
    r_kin_within_threshold: bool


def peaking_metric(trace, window: float = 2.0) -> PeakingReport:
    """
    Transient peak magnitudes over the first window seconds of a run.

    beta_overshoot is the excess of the estimated over the true sideslip peak.
    """
    t = trace["t"]
    if t.size == 0:
        raise ParameterError("peaking metric needs a nonempty trace")
    mask = t <= t[0] + window
    beta_hat_peak = float(np.max(np.abs(trace["beta_hat"][mask])))
    beta_peak = float(np.max(np.abs(trace["beta"][mask])))
    r_kin = np.abs(trace["r_kin"][mask])
    return PeakingReport(
        beta_hat_peak=beta_hat_peak,
        beta_peak=beta_peak,
        beta_overshoot=max(0.0, beta_hat_peak - beta_peak),
        r_kin_peak=float(np.max(r_kin)),
        r_kin_raw_peak=float(np.max(np.abs(trace["r_kin_raw"][mask]))),
        clipping_engaged=bool(np.any(trace["sat_rkin"][mask] > 0)),
        r_kin_within_threshold=bool(np.all(r_kin <= trace["r_threshold"][mask] + 1e-12)),
    )
