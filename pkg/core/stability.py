"""
Numerical checks of the closed-loop stability arguments: kinematic equilibrium and
Jacobian, the kinematic Lyapunov derivative around the manifold, the composite
dynamic Lyapunov function along linear-plant trajectories, and settling times.
"""
import logging
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve

from core.dynamic_controller import (
    DynCtlState, DynGains, composite_lyapunov, desired_steering, steering_rate,
)
from core.exceptions import ParameterError
from core.kinematic_controller import PROP, KinGains, _manifold_terms, kinematic_loop_rhs
from core.vehicle import DynCoeffs

logger = logging.getLogger(__name__)

JACOBIAN_STEP = 1e-6


def kinematic_equilibrium(gains: KinGains, c: float, v_bar: float, kappa: float = 0.0,
                          delta_ar: float = 0.0) -> np.ndarray:
    """Equilibrium (theta_bar_e, y_e, sigma_k) of the ideal-tracking kinematic loop."""
    guess = np.array([math.asin(delta_ar), 0.0, -v_bar * delta_ar / gains.K_i if gains.K_i > 0 else 0.0])
    if np.max(np.abs(kinematic_loop_rhs(guess, gains, c, v_bar, kappa, delta_ar))) < 1e-13:
        return guess
    z, info, ok, msg = fsolve(lambda z: kinematic_loop_rhs(z, gains, c, v_bar, kappa, delta_ar),
                              guess, xtol=1e-13, full_output=True)
    if ok != 1:
        raise ParameterError(f"kinematic equilibrium not found: {msg}")
    return z


def numerical_jacobian(f, z0, h: float = JACOBIAN_STEP) -> np.ndarray:
    """Central-difference Jacobian of f at z0."""
    z0 = np.asarray(z0, dtype=float)
    cols = []
    for i in range(z0.size):
        e = np.zeros_like(z0)
        e[i] = h
        cols.append((np.asarray(f(z0 + e)) - np.asarray(f(z0 - e))) / (2.0 * h))
    return np.column_stack(cols)


def closed_loop_jacobian(gains: KinGains, c: float, v_bar: float, kappa: float = 0.0, delta_ar: float = 0.0,
                         mode: str = PROP) -> np.ndarray:
    z_eq = kinematic_equilibrium(gains, c, v_bar, kappa, delta_ar)
    return numerical_jacobian(lambda z: kinematic_loop_rhs(z, gains, c, v_bar, kappa, delta_ar, mode), z_eq)


def jacobian_eigenvalues(gains: KinGains, c: float, v_bar: float, kappa: float = 0.0,
                         delta_ar: float = 0.0) -> np.ndarray:
    """Eigenvalues sorted by real part, then imaginary part."""
    eig = np.linalg.eigvals(closed_loop_jacobian(gains, c, v_bar, kappa, delta_ar))
    return eig[np.lexsort((eig.imag, eig.real))]


def manifold_value_and_rate(z, gains: KinGains, c: float, v_bar: float, kappa: float = 0.0,
                            delta_ar: float = 0.0):
    """S_kin and its time derivative along the ideal-tracking kinematic loop (unsaturated arcsin)."""
    theta_bar, y, sigma = z
    S, saturated, _, u, _, root = _manifold_terms(y, theta_bar, sigma, c, 0.0, v_bar, delta_ar, gains)
    theta_dot, y_dot, _ = kinematic_loop_rhs(z, gains, c, v_bar, kappa, delta_ar)
    u_dot = 0.0 if saturated else (c * y_dot + gains.K_i * y) / v_bar
    return S, theta_dot + u_dot / root


def kinematic_lyapunov_rate(S_grid, gains: KinGains, c: float, v_bar: float) -> np.ndarray:
    """
    dW_kin/dt = S dS/dt on the slice y_e = sigma_k = 0, where S_kin = theta_bar_e.
    """
    out = []
    for S in np.asarray(S_grid, dtype=float):
        s_val, s_dot = manifold_value_and_rate((S, 0.0, 0.0), gains, c, v_bar)
        out.append(s_val * s_dot)
    return np.array(out)


def reaching_margin(S_grid, gains: KinGains, c: float) -> np.ndarray:
    """
    psi |zeta| - rho (1 - |zeta|) with zeta = tanh(S/eps) and rho = c |sin S| on the
    same slice; positive values guarantee dW_kin/dt < 0.
    """
    S = np.asarray(S_grid, dtype=float)
    zeta = np.abs(np.tanh(S / gains.eps_kin))
    rho = c * np.abs(np.sin(S))
    return gains.psi_kin * zeta - rho * (1.0 - zeta)


def dynamic_loop_rhs(t: float, z, coeffs: DynCoeffs, gains: DynGains, r_kin_fn):
    """
    Linear slip-yaw plant under the continuous yaw-tracking and backstepping laws.

    State z = (beta, r, phi, sigma_r, sigma_phi) with exact state feedback and
    unsaturated commands. r_kin_fn(t) returns (r_kin, r_kin_dot, r_kin_ddot).
    """
    beta, r, phi, sigma_r, sigma_phi = z
    r_kin, r_kin_dot, r_kin_ddot = r_kin_fn(t)
    state = DynCtlState(sigma_r=sigma_r, sigma_phi=sigma_phi)
    _, phi_des = desired_steering(beta, r_kin, r_kin_dot, r, state, coeffs, gains)
    r_e = r_kin - r
    phi_e = phi_des - phi
    beta_dot = coeffs.a11 * beta + coeffs.a12 * r + coeffs.b11 * phi
    r_dot = coeffs.a21 * beta + coeffs.a22 * r + coeffs.b21 * phi
    _, omega = steering_rate(beta_dot, r_kin_dot, r_kin_ddot, r_e, r_kin_dot - r_dot, phi_e, state, coeffs, gains)
    return [beta_dot, r_dot, omega, r_e, phi_e]


def composite_lyapunov_trajectory(z0, coeffs: DynCoeffs, gains: DynGains, r_kin_fn, t_end: float = 5.0,
                                  n_points: int = 501):
    """Integrates dynamic_loop_rhs tightly and returns (t, W_c(t))."""
    t_eval = np.linspace(0.0, t_end, n_points)
    sol = solve_ivp(dynamic_loop_rhs, (0.0, t_end), z0, t_eval=t_eval, args=(coeffs, gains, r_kin_fn),
                    method="DOP853", rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise ParameterError(f"dynamic loop integration failed: {sol.message}")
    W = []
    for t, (beta, r, phi, sigma_r, sigma_phi) in zip(sol.t, sol.y.T):
        r_kin, r_kin_dot, _ = r_kin_fn(t)
        state = DynCtlState(sigma_r=sigma_r, sigma_phi=sigma_phi)
        _, phi_des = desired_steering(beta, r_kin, r_kin_dot, r, state, coeffs, gains)
        W.append(composite_lyapunov(r_kin - r, sigma_r, phi_des - phi, sigma_phi, coeffs, gains))
    return sol.t, np.array(W)


def simulate_kinematic_loop(z0, gains: KinGains, c: float, v_bar: float, t_end: float, kappa: float = 0.0,
                            delta_ar: float = 0.0, mode: str = PROP, n_points: int = 2001):
    """Closed kinematic loop with ideal yaw tracking; returns (t, z) with z rows per state."""
    t_eval = np.linspace(0.0, t_end, n_points)
    sol = solve_ivp(lambda t, z: kinematic_loop_rhs(z, gains, c, v_bar, kappa, delta_ar, mode),
                    (0.0, t_end), z0, t_eval=t_eval, method="RK45", rtol=1e-9, atol=1e-11, max_step=0.01)
    if not sol.success:
        raise ParameterError(f"kinematic loop integration failed: {sol.message}")
    return sol.t, sol.y


def settling_time(t, x, fraction: float = 0.02) -> float:
    """Time after which |x| stays within fraction of |x(0)|."""
    t = np.asarray(t)
    x = np.abs(np.asarray(x))
    outside = np.nonzero(x > fraction * x[0])[0]
    if outside.size == 0:
        return float(t[0])
    if outside[-1] == x.size - 1:
        return math.inf
    return float(t[outside[-1] + 1])
