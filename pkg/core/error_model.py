"""
Path-frame tracking errors of the rear-axle point.

Conventions used throughout the package: theta_e = theta_ref - theta and
y_e = n_ref . (R_ref - R_B) with n_ref the left normal of the reference tangent,
so that dy_e/dt = v sin(theta_e - alpha_r). In a counter-clockwise frame this makes
y_e positive when the vehicle sits to the right of the path.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

import config
from core.exceptions import ProjectionLostError
from core.path_geometry import Path, RefSample
from core.vehicle import wrap_angle

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_ITERS = 25


@dataclass(frozen=True)
class ErrorState:
    y_e: float = 0.0
    theta_e: float = 0.0
    theta_bar_e: float = 0.0
    sigma_k: float = 0.0
    s_ref: float = 0.0
    v_ref: float = 0.0
    x_e: float = 0.0
    kappa_ref: float = 0.0
    kappa_slope: float = 0.0
    theta_ref: float = 0.0
    seg_index: int = 0
    at_end: bool = False


def _offsets(ref: RefSample, x: float, y: float):
    """
    Longitudinal and lateral offsets of (x, y) relative to a reference sample.

    The lateral offset is n_ref . (R_ref - R), positive for a point to the right of
    the direction of travel.
    """
    d = np.array([ref.x_ref - x, ref.y_ref - y])
    return -float(ref.tangent @ d), float(ref.normal @ d)


def project(path: Path, x: float, y: float, s_guess: float, window: float):
    """
    Finds s_ref near s_guess where the longitudinal offset of (x, y) vanishes.

    Returns (reference sample, longitudinal offset x_e). At the path ends the arc
    length clamps and the residual offset is returned unchanged. The lateral error
    measured against the returned sample is positive right of the path.
    """
    lo = max(0.0, s_guess - window)
    hi = min(path.total_length, s_guess + window)

    def longitudinal(s):
        return _offsets(path.sample(s), x, y)[0]

    s = min(max(s_guess, lo), hi)
    for _ in range(NEWTON_ITERS):
        ref = path.sample(s)
        g, lateral = _offsets(ref, x, y)
        if abs(g) < NEWTON_TOL:
            return ref, g
        slope = -1.0 - ref.kappa_ref * lateral
        if abs(slope) < 1e-6:
            break
        s_next = s - g / slope
        if not lo <= s_next <= hi:
            break
        s = s_next

    g_lo, g_hi = longitudinal(lo), longitudinal(hi)
    if g_lo * g_hi <= 0.0:
        s = brentq(longitudinal, lo, hi, xtol=1e-12)
        ref = path.sample(s)
        return ref, _offsets(ref, x, y)[0]
    # Beyond either end of the path the arc length saturates.
    if hi >= path.total_length and g_hi > 0.0:
        ref = path.sample(path.total_length)
        return ref, g_hi
    if lo <= 0.0 and g_lo < 0.0:
        ref = path.sample(0.0)
        return ref, g_lo
    raise ProjectionLostError(f"no projection of ({x:.2f}, {y:.2f}) within s in [{lo:.2f}, {hi:.2f}]")


def reference_speed(v: float, theta_e: float, alpha_r: float, y_e: float, kappa_ref: float) -> float:
    """Arc-length rate of the desired posture that keeps the longitudinal error at zero."""
    return v * math.cos(theta_e - alpha_r) / (1.0 + y_e * kappa_ref)


def compensated_heading(theta_e: float, beta_hat: float, K_F: float = config.KIN_K_F) -> float:
    return theta_e + K_F * beta_hat


def _measure(ref: RefSample, pose, v: float, alpha_r: float, x_e: float, path: Path):
    x, y, theta = pose
    _, y_e = _offsets(ref, x, y)
    if abs(y_e) > config.PROJECTION_LOST_OFFSET:
        raise ProjectionLostError(f"lateral error {y_e:.2f} m exceeds {config.PROJECTION_LOST_OFFSET} m")
    theta_e = float(wrap_angle(ref.theta_ref - theta))
    v_ref = reference_speed(v, theta_e, alpha_r, y_e, ref.kappa_ref)
    return dict(
        y_e=y_e, theta_e=theta_e, s_ref=ref.s, v_ref=v_ref, x_e=x_e,
        kappa_ref=ref.kappa_ref, kappa_slope=ref.kappa_slope, theta_ref=ref.theta_ref,
        seg_index=ref.seg_index, at_end=ref.s >= path.total_length,
    )


def initial_error_state(path: Path, pose, v: float = 0.0, alpha_r: float = 0.0,
                        beta_hat: float = 0.0, K_F: float = config.KIN_K_F) -> ErrorState:
    """Anchors the desired posture at the projection of the starting pose near s = 0."""
    ref, x_e = project(path, pose[0], pose[1], 0.0, config.PROJECTION_WINDOW_MARGIN + 10.0)
    fields = _measure(ref, pose, v, alpha_r, x_e, path)
    return ErrorState(theta_bar_e=compensated_heading(fields["theta_e"], beta_hat, K_F), sigma_k=0.0, **fields)


def update_reference(path: Path, pose, v: float, prev: ErrorState, dt: float, alpha_r: float = 0.0,
                     beta_hat: float = 0.0, K_F: float = config.KIN_K_F) -> ErrorState:
    """
    Advances the desired posture to the new pose and recomputes the tracking errors.

    The projection searches within +/-(v*dt + margin) of the previous arc length and
    sigma_k is advanced with the trapezoid rule. y_e > 0 right of the path and
    theta_e = theta_ref - theta, so dy_e/dt = v sin(theta_e - alpha_r).
    """
    window = abs(v) * dt + config.PROJECTION_WINDOW_MARGIN
    ref, x_e = project(path, pose[0], pose[1], prev.s_ref, window)
    fields = _measure(ref, pose, v, alpha_r, x_e, path)
    sigma_k = prev.sigma_k + 0.5 * dt * (prev.y_e + fields["y_e"])
    return ErrorState(theta_bar_e=compensated_heading(fields["theta_e"], beta_hat, K_F), sigma_k=sigma_k, **fields)


def with_beta_hat(err: ErrorState, beta_hat: float, K_F: float = config.KIN_K_F) -> ErrorState:
    return replace(err, theta_bar_e=compensated_heading(err.theta_e, beta_hat, K_F))
