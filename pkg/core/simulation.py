import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

import config
from core.baselines import BaselineAController, BaselineBController, tune_baseline_a
from core.dynamic_controller import DynamicController, tune_dyn_gains
from core.error_model import initial_error_state, update_reference
from core.exceptions import NonFiniteStateError, RunAbortedError, SingularSpeedError, SteeringSimError
from core.kinematic_controller import PROP, PROP_S, KinematicController, c_ramp
from core.observer import HgoState, hgo_advance, hgo_rhs
from core.path_geometry import build_path
from core.vehicle import (
    BETA, PHI, PHI_MAX, R, THETA, X, Y, PlantState, dyn_coeffs, lateral_acceleration,
    nonlinear_truth_deriv, plant_rhs, plant_substeps, rear_axle_slip, resolve_rear_slip, rk4_step,
    sideslip_perturbation,
)

logger = logging.getLogger(__name__)

# Column order of every trace; the CSV header repeats it verbatim.
TRACE_COLUMNS = (
    "t", "s_ref", "x", "y", "theta", "beta", "r", "phi", "v",
    "y_meas", "r_hat", "beta_hat",
    "y_e", "theta_e", "theta_bar_e", "sigma_k", "x_e",
    "kappa_ref", "v_ref", "c_now", "c_safe",
    "r_kin", "r_kin_raw", "r_threshold", "phi_des", "omega",
    "a_lat", "a_ref", "alpha_r", "delta_ar",
    "sat_rkin", "sat_phi", "sat_omega", "safety_flag", "comfort_flag",
)


@dataclass
class SimTrace:
    """Per-step record of one run; columns are addressed by name."""
    columns: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __len__(self) -> int:
        return self.data.shape[0]

    def final(self, name: str) -> float:
        return float(self[name][-1])


def initial_pose(path, y_e0: float, theta_e0: float):
    """Rear-axle pose at the start of the path with the given lateral and heading error."""
    ref = path.sample(0.0)
    x, y = np.array([ref.x_ref, ref.y_ref]) - y_e0 * ref.normal
    return float(x), float(y), ref.theta_ref - theta_e0


def _max_time(scenario, path) -> float:
    if scenario.duration is not None:
        return scenario.duration
    cruise = max(scenario.speed_profile.final_speed, 1.0)
    return scenario.speed_profile.knots[-1][0] + 2.0 * path.total_length / cruise + 30.0


def _speed_range(scenario):
    """Cruise speeds of the profile; the start-up ramp through lower speeds is excluded."""
    floor = scenario.model_params.v_eps
    cruise = [v for _, v in scenario.speed_profile.knots if v > 0.0] or [floor]
    lo = min(max(min(cruise), floor), 40.0)
    return lo, min(max(max(cruise), lo), 40.0)


class Simulator:
    """
    Fixed-step closed loop of one scenario.

    Each step samples the reference, runs the error model and the selected controller,
    integrates the truth plant with RK4 substeps, samples the yaw-rate sensor and
    advances the observer. The controller holds its command over dt; scenario.substeps
    refines only the plant and observer integration. The run stops at the last step
    whose projection lies inside the path.
    """

    def __init__(self, scenario):
        self.scenario = scenario
        self.path = build_path(scenario.segments)
        self.truth = scenario.truth_params
        self.model = scenario.model_params
        self.rng = np.random.default_rng(scenario.seed)
        self.kin = None
        self.dyn = None
        self.baseline = None
        name = scenario.controller
        if name in (PROP, PROP_S):
            self.kin = KinematicController(scenario.kin_gains, self.model, name)
            gains = scenario.dyn_gains or tune_dyn_gains(self.model, _speed_range(scenario), scenario.dyn_T_s)
            self.dyn = DynamicController(gains)
        elif name == "A":
            self.baseline = BaselineAController(scenario.baseline_a or tune_baseline_a(self.model), self.model)
        else:
            self.baseline = BaselineBController(scenario.baseline_b, self.model)

    def _alpha_r(self, plant: PlantState, beta_est: float, v: float, previous: float) -> float:
        if self.scenario.feedback == "state":
            return rear_axle_slip(plant.beta, plant.r, v, self.truth)
        try:
            return resolve_rear_slip(beta_est, self.model, v)
        except SingularSpeedError:
            logger.debug(f"[Simulation] Rear-slip relation singular at v={v:.3f}, holding alpha_r")
            return previous

    def _pose_measurement(self, vec):
        std = self.scenario.disturbances.pose_noise_std
        if std <= 0:
            return vec[X], vec[Y], vec[THETA]
        dx, dy = self.rng.normal(0.0, std, size=2)
        return vec[X] + dx, vec[Y] + dy, vec[THETA]

    def run(self) -> SimTrace:
        sc = self.scenario
        dist = sc.disturbances
        dt = sc.dt
        t_stop = _max_time(sc, self.path)
        slope_force = self.truth.m * config.GRAVITY * dist.slope_grade
        disturbance = (dist.delta_beta, dist.delta_r)
        output_feedback = sc.feedback == "output"
        comfort_limit = sc.kin_gains.k1 * self.truth.mu * config.GRAVITY

        x0, y0, th0 = initial_pose(self.path, sc.y_e0, sc.theta_e0)
        vec = np.array([0.0, 0.0, 0.0, x0, y0, th0])
        hgo = HgoState(sc.observer_offset[0], sc.observer_offset[1])
        y_meas = 0.0
        omega_applied = 0.0
        alpha_r = 0.0
        step_pending = dist.step_time is not None
        rows = []
        err = None
        k = 0
        t = 0.0
        logger.info(f"[Simulation] 🟢 Starting run '{sc.name}' ({sc.controller}, {sc.feedback} feedback, "
                    f"seed {sc.seed}, path {self.path.total_length:.1f} m)")
        try:
            while True:
                v = sc.speed_profile.speed(t)
                v_dot = sc.speed_profile.acceleration(t)
                if step_pending and t >= dist.step_time - 1e-12 and err is not None:
                    normal = np.array([-math.sin(err.theta_ref), math.cos(err.theta_ref)])
                    vec[X:Y + 1] -= dist.step_offset * normal
                    step_pending = False
                    logger.info(f"[Simulation] Lateral step of {dist.step_offset} m applied at t={t:.2f}s")
                plant = PlantState.from_array(vec, v)
                body = nonlinear_truth_deriv(plant, self.truth, slope_force, disturbance)
                coeffs = dyn_coeffs(self.model, v)
                if output_feedback:
                    r_est, beta_est = hgo.r_hat, hgo.beta_hat
                    beta_dot_est = hgo_rhs(hgo, y_meas, plant.phi, coeffs, sc.hgo)[1]
                    r_meas = y_meas
                else:
                    r_est, beta_est, beta_dot_est = plant.r, plant.beta, body[0]
                    r_meas = plant.r

                alpha_r = self._alpha_r(plant, beta_est, v, alpha_r)
                pose = self._pose_measurement(vec)
                K_F = sc.kin_gains.K_F
                if err is None:
                    err = initial_error_state(self.path, pose, v, alpha_r, beta_est, K_F)
                    if self.kin is not None:
                        self.kin.initialise(err, v)
                else:
                    err = update_reference(self.path, pose, v, err, dt, alpha_r, beta_est, K_F)
                if err.at_end and rows:
                    break
                delta_ar = sideslip_perturbation(err.kappa_ref, self.model, v)

                row = dict.fromkeys(TRACE_COLUMNS, math.nan)
                if self.kin is not None:
                    schedule, _, cmd = self.kin.step(t, err, v, v_dot, delta_ar, beta_est)
                    dc = self.dyn.step(dt, coeffs, beta_est, beta_dot_est, r_est, plant.phi,
                                       cmd.r_kin, cmd.r_dot, cmd.r_ddot)
                    if sc.dyn_mode == "passthrough":
                        omega_raw = (dc.phi_des - plant.phi) / dt
                        omega = float(np.clip(omega_raw, -config.OMEGA_MAX, config.OMEGA_MAX))
                    else:
                        omega, omega_raw = dc.omega, dc.omega_raw
                    row.update(c_now=schedule.c_now, c_safe=schedule.c_safe, r_kin=cmd.r_kin, r_kin_raw=cmd.r_raw,
                               r_threshold=cmd.r_threshold, phi_des=dc.phi_des, sat_rkin=float(cmd.clipped),
                               sat_phi=float(dc.phi_saturated), safety_flag=float(schedule.safety_violation))
                elif sc.controller == "A":
                    omega, r_cmd = self.baseline.step(err, r_meas, plant.phi, v, dt)
                    omega_raw = omega
                    row.update(r_kin=r_cmd, r_kin_raw=r_cmd)
                else:
                    omega, r_ref = self.baseline.step(err, r_est, plant.phi, coeffs, dt, t, v, beta_est)
                    omega_raw = omega
                    row.update(c_now=c_ramp(sc.baseline_b.kin, t)[0], r_kin=r_ref, r_kin_raw=r_ref,
                               phi_des=self.baseline.state.phi_des)

                if sc.actuator_tau > 0:
                    omega_applied += (1.0 - math.exp(-dt / sc.actuator_tau)) * (omega - omega_applied)
                else:
                    omega_applied = omega

                a_lat = lateral_acceleration(v, body[0], plant.r)
                row.update(
                    t=t, s_ref=err.s_ref, x=plant.x, y=plant.y, theta=plant.theta, beta=plant.beta, r=plant.r,
                    phi=plant.phi, v=v, y_meas=y_meas, r_hat=r_est, beta_hat=beta_est,
                    y_e=err.y_e, theta_e=err.theta_e, theta_bar_e=err.theta_bar_e, sigma_k=err.sigma_k, x_e=err.x_e,
                    kappa_ref=err.kappa_ref, v_ref=err.v_ref, omega=omega_applied,
                    a_lat=a_lat, a_ref=err.kappa_ref * err.v_ref ** 2, alpha_r=alpha_r, delta_ar=delta_ar,
                    sat_omega=float(abs(omega_raw) > config.OMEGA_MAX), comfort_flag=float(abs(a_lat) > comfort_limit),
                )
                rows.append([row[c] for c in TRACE_COLUMNS])

                if err.at_end or t >= t_stop - 1e-9:
                    break

                n = plant_substeps(self.truth, v, dt) * sc.substeps
                h = dt / n

                def f(tau, x, omega=omega_applied):
                    return plant_rhs(x, sc.speed_profile.speed(tau), omega, self.truth, slope_force, disturbance)

                for i in range(n):
                    vec = rk4_step(f, t + i * h, vec, h)
                vec[PHI] = float(np.clip(vec[PHI], -PHI_MAX, PHI_MAX))
                if not np.all(np.isfinite(vec)):
                    raise NonFiniteStateError(f"plant state became non-finite: {vec}")

                k += 1
                t = k * dt
                if output_feedback:
                    noise = self.rng.normal(0.0, dist.yaw_noise_std) if dist.yaw_noise_std > 0 else 0.0
                    y_meas = float(vec[R]) + noise
                    hgo = hgo_advance(hgo, y_meas, float(vec[PHI]), dyn_coeffs(self.model, sc.speed_profile.speed(t)),
                                      sc.hgo, dt, sc.substeps)
                    if not (math.isfinite(hgo.r_hat) and math.isfinite(hgo.beta_hat)):
                        raise NonFiniteStateError("observer state became non-finite")
        except SteeringSimError as e:
            logger.error(f"[Simulation] 🔴 ERROR: run '{sc.name}' aborted at t={t:.2f}s (step {k}): {e}")
            raise RunAbortedError(e, t, k) from e

        trace = SimTrace(TRACE_COLUMNS, np.array(rows, dtype=float), self._meta(vec))
        logger.info(f"[Simulation] ✅ Run '{sc.name}' finished: {len(trace)} steps, t={t:.2f}s, "
                    f"final y_e={trace.final('y_e'):+.4f} m")
        return trace

    def _meta(self, vec) -> dict:
        sc = self.scenario
        meta = {
            "scenario": sc.name,
            "controller": sc.controller,
            "feedback": sc.feedback,
            "weather": sc.weather,
            "seed": sc.seed,
            "dt": sc.dt,
            "substeps": sc.substeps,
            "path_length": self.path.total_length,
            "segments": [list(b) for b in self.path.segment_bounds()],
            "final_beta": float(vec[BETA]),
        }
        if self.kin is not None:
            meta["safety_violations"] = self.kin.safety_violations
            meta["c0"] = self.kin.c0
            meta["dyn_gains"] = asdict(self.dyn.gains)
        return meta


def run(scenario) -> SimTrace:
    """Simulates one scenario; raises RunAbortedError with the abort time and step."""
    return Simulator(scenario).run()
