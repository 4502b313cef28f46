"""
Data generators behind the analysis figures and the comparison studies.

Every generator returns a FigureData table whose rows can be written to CSV
unchanged; plotting lives in utils.drawing.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

import config
from core.batch_runner import batch
from core.exceptions import ParameterError
from core.kinematic_controller import PROP, PROP_S, KinGains, raw_yaw_rate, steering_saturation_region
from core.metrics import segment_metrics
from core.observer import HgoConfig, HgoState, hgo_advance, peaking_metric
from core.path_geometry import LINE, PathSegment
from core.scenario import Disturbances, SpeedProfile, default_scenario
from core.simulation import run
from core.stability import kinematic_lyapunov_rate, reaching_margin, settling_time, simulate_kinematic_loop
from core.vehicle import VehicleParams, dyn_coeffs, kappa_max, sideslip_perturbation

logger = logging.getLogger(__name__)


@dataclass
class FigureData:
    name: str
    columns: tuple
    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def _params(name: str) -> VehicleParams:
    return VehicleParams.from_dict(config.NOMINAL_VEHICLE if name == "nominal" else config.PERTURBED_VEHICLE)


def constant_gains(c: float, **overrides) -> KinGains:
    """
    Kinematic gains holding c fixed.

    K_i = c^2/100 puts the integral root of s^2 + c s + K_i near c/100, so its share
    of the lateral response stays below the 2% settling band.
    """
    values = dict(c0=c, c_ss=c, t_end=0.0, K_i=min(config.KIN_K_I, c * c / 100.0), enforce_safety=False)
    values.update(overrides)
    return KinGains(**values)


def delta_ar_zero_crossing(params: VehicleParams, v_lo: float | None = None, v_hi: float = 60.0) -> float:
    """Speed at which the uncompensated sideslip mismatch changes sign."""
    v_lo = params.v_eps if v_lo is None else v_lo
    f = lambda v: sideslip_perturbation(1.0, params, v)
    if f(v_lo) * f(v_hi) > 0:
        raise ParameterError(f"sideslip mismatch does not change sign on [{v_lo}, {v_hi}] m/s")
    return float(brentq(f, v_lo, v_hi, xtol=1e-10))


def slip_mismatch_curve(v_grid=None) -> FigureData:
    """Sideslip mismatch at the comfort curvature limit versus speed, for both parameter sets."""
    v_grid = np.linspace(0.5, 25.0, 99) if v_grid is None else np.asarray(v_grid, dtype=float)
    nominal, perturbed = _params("nominal"), _params("perturbed")
    rows = []
    for v in v_grid:
        k = kappa_max(v)
        rows.append((v, k, sideslip_perturbation(k, nominal, v), sideslip_perturbation(k, perturbed, v)))
    meta = {
        "zero_crossing_nominal": delta_ar_zero_crossing(nominal),
        "zero_crossing_perturbed": delta_ar_zero_crossing(perturbed),
    }
    logger.info(f"[Studies] Sideslip mismatch vanishes at {meta['zero_crossing_perturbed']:.3f} m/s (perturbed set)")
    return FigureData("slip_mismatch", ("v", "kappa_max", "delta_ar_nominal", "delta_ar_perturbed"), np.array(rows), meta)


def saturation_area(mask: np.ndarray) -> float:
    """Share of the posture grid whose command stays within the steering-rate limit."""
    return float(np.mean(mask))


def saturation_contours(c_values=(0.65, 2.0, 3.0), speeds=(2.0, 5.0, 10.0), y_span: float = 2.0,
                        theta_span: float = 0.6, n: int = 41) -> FigureData:
    y_grid = np.linspace(-y_span, y_span, n)
    theta_grid = np.linspace(-theta_span, theta_span, n)
    wheelbase = _params("nominal").wheelbase
    rows = []
    areas = {}
    for c in c_values:
        gains = constant_gains(c, psi_kin=0.1, eps_kin=0.1)
        for v in speeds:
            mask, omega = steering_saturation_region(gains, v, y_grid, theta_grid, c, wheelbase)
            areas[f"c={c:g},v={v:g}"] = saturation_area(mask)
            for i, theta in enumerate(theta_grid):
                for j, y in enumerate(y_grid):
                    rows.append((c, v, theta, y, omega[i, j], float(mask[i, j])))
    return FigureData("saturation", ("c", "v", "theta_e", "y_e", "omega", "within_limit"), np.array(rows),
                      {"areas": areas})


def straight_scenario(c: float, y_e0: float, v: float = 10.0, duration: float = 10.0, seed: int = 0):
    """Constant-speed, noise-free, state-feedback run on a straight line with constant c."""
    length = v * duration + 50.0
    return default_scenario(
        name=f"c{c:g}_y{y_e0:g}",
        segments=[PathSegment(LINE, length, label="line")],
        controller=PROP,
        feedback="state",
        kin_gains=constant_gains(c),
        speed_profile=SpeedProfile(((0.0, v),)),
        disturbances=Disturbances(yaw_noise_std=0.0),
        y_e0=y_e0,
        duration=duration,
        seed=seed,
    )


def constant_c_sweep(c_values=(0.65, 2.0, 3.0, 5.0), perturbations=(0.25, 0.5, 1.0), c_fixed: float = 2.0,
                     y_fixed: float = 0.25, v: float = 10.0, duration: float = 10.0,
                     workers: int = config.BATCH_WORKERS) -> FigureData:
    """Constant-c sweeps: c varied at a fixed perturbation, then the perturbation varied at fixed c."""
    cases = [("c_sweep", c, y_fixed) for c in c_values] + [("y_sweep", c_fixed, y) for y in perturbations]
    result = batch([straight_scenario(c, y, v, duration) for _, c, y in cases], workers)
    rows = []
    runs = []
    for series_id, ((series, c, y0), trace) in enumerate(zip(cases, result.traces)):
        if trace is None:
            continue
        t, y_e, a = trace["t"], trace["y_e"], trace["a_lat"]
        runs.append({"series": series, "c": c, "y_e0": y0, "settling_time": settling_time(t, y_e),
                     "peak_a_lat": float(np.max(np.abs(a)))})
        for k in range(len(trace)):
            rows.append((series_id, c, y0, t[k], y_e[k], a[k]))
    return FigureData("constant_c", ("series", "c", "y_e0", "t", "y_e", "a_lat"), np.array(rows),
                      {"runs": runs, "failures": [asdict(f) for f in result.failures]})


def peak_lateral_acceleration(c: float, y_e0: float, v: float, t_end: float = 10.0) -> float:
    """Peak v*r_kin of the ideal-tracking kinematic loop from a pure lateral offset."""
    gains = constant_gains(c)
    t, z = simulate_kinematic_loop([0.0, y_e0, 0.0], gains, c, v, t_end, n_points=1001)
    r = [raw_yaw_rate(y, th, sig, 0.0, c, 0.0, v, 0.0, gains) for th, y, sig in z.T]
    return float(v * np.max(np.abs(r)))


def admissible_c(perturbations=(0.25, 0.5, 1.0), speeds=(2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0),
                 c_grid=None, t_end: float = 10.0) -> FigureData:
    """Largest c on the grid whose peak lateral acceleration stays within k1*k2*mu*g."""
    c_grid = np.linspace(0.25, 6.0, 24) if c_grid is None else np.asarray(c_grid, dtype=float)
    bound = config.KIN_K1 * config.KIN_K2 * config.NOMINAL_VEHICLE["mu"] * config.GRAVITY
    rows = []
    for y0 in perturbations:
        for v in speeds:
            admissible = [c for c in c_grid if peak_lateral_acceleration(c, y0, v, t_end) <= bound]
            rows.append((y0, v, max(admissible) if admissible else math.nan))
    return FigureData("c_limit", ("y_e0", "v", "c_max"), np.array(rows), {"accel_bound": bound})


def phase_portraits(c_values=(0.65, 2.0, 3.0), v: float = 10.0, y_starts=(-1.0, -0.5, 0.5, 1.0),
                    theta_starts=(-0.3, 0.0, 0.3), t_end: float = 15.0) -> FigureData:
    """(theta_bar_e, y_e) phase portraits of the kinematic loop."""
    rows = []
    run_id = 0
    for c in c_values:
        gains = constant_gains(c)
        for y0 in y_starts:
            for th0 in theta_starts:
                t, z = simulate_kinematic_loop([th0, y0, 0.0], gains, c, v, t_end, n_points=301)
                for k in range(t.size):
                    rows.append((c, run_id, t[k], z[0, k], z[1, k]))
                run_id += 1
    return FigureData("phase", ("c", "run", "t", "theta_bar_e", "y_e"), np.array(rows))


def lyapunov_rate_curve(S_grid=None, c: float = 0.65, v: float = 10.0) -> FigureData:
    """Kinematic Lyapunov derivative and reaching margin across S_kin with the gentle preset gains."""
    S = np.linspace(-1.0, 1.0, 401) if S_grid is None else np.asarray(S_grid, dtype=float)
    S = S[S != 0.0]
    gains = KinGains.from_dict({"preset": "gentle"})
    w_dot = kinematic_lyapunov_rate(S, gains, c, v)
    margin = reaching_margin(S, gains, c)
    meta = {"all_negative": bool(np.all(w_dot < 0)), "margin_positive": bool(np.all(margin > 0))}
    return FigureData("lyapunov", ("S_kin", "W_kin_dot", "reaching_margin"), np.column_stack([S, w_dot, margin]), meta)


def observer_noise_tradeoff(eps_values=(0.02, 0.05, 0.1, 0.2), noise_std: float = config.SIM_YAW_NOISE_STD,
                            v: float = 10.0, phi: float = 0.02, duration: float = 20.0, dt: float = config.SIM_DT,
                            seed: int = config.SIM_SEED) -> FigureData:
    """
    Spread of the sideslip estimate under yaw-rate noise for several eps.

    The plant is the observer's own linear model held at a constant steering angle,
    so the spread after the transient is due to noise alone. The same noise sequence
    drives every eps.
    """
    params = _params("nominal")
    coeffs = dyn_coeffs(params, v)
    A, B = coeffs.matrices()
    beta_ss, r_ss = np.linalg.solve(A, -B * phi)
    n = int(round(duration / dt))
    noise = np.random.default_rng(seed).normal(0.0, noise_std, size=n)
    rows = []
    for eps in eps_values:
        cfg = HgoConfig(eps=eps)
        state = HgoState(r_ss, beta_ss)
        beta_err, r_err = [], []
        for k in range(n):
            state = hgo_advance(state, r_ss + noise[k], phi, coeffs, cfg, dt)
            if k >= n // 2:
                beta_err.append(state.beta_hat - beta_ss)
                r_err.append(state.r_hat - r_ss)
        rows.append((eps, float(np.std(beta_err)), float(np.std(r_err))))
    return FigureData("noise", ("eps", "beta_hat_std", "r_hat_std"), np.array(rows), {"noise_std": noise_std})


def peaking_study(scenario=None, offset=(0.3, 0.1), window: float = 2.0) -> FigureData:
    """PROP against PROP-S with the observer started away from the truth."""
    scenario = scenario or default_scenario(duration=10.0)
    rows = []
    reports = {}
    for code, mode in enumerate((PROP, PROP_S)):
        trace = run(scenario.with_overrides(controller=mode, feedback="output", observer_offset=tuple(offset)))
        rep = peaking_metric(trace, window)
        reports[mode] = asdict(rep)
        rows.append((code, rep.beta_hat_peak, rep.beta_overshoot, rep.r_kin_peak, rep.r_kin_raw_peak,
                     float(rep.clipping_engaged)))
    return FigureData("peaking", ("mode", "beta_hat_peak", "beta_overshoot", "r_kin_peak", "r_kin_raw_peak",
                                  "clipping"), np.array(rows), {"modes": [PROP, PROP_S], "reports": reports})


def actuator_lag_study(scenario=None, taus=(0.0, 0.05, 0.1, 0.2)) -> FigureData:
    """Backstepping steering rate against a rate-limited pass-through of phi_des under actuator lag."""
    scenario = scenario or default_scenario(duration=30.0, disturbances=Disturbances(yaw_noise_std=0.0))
    rows = []
    for tau in taus:
        for code, mode in enumerate(("backstepping", "passthrough")):
            trace = run(scenario.with_overrides(dyn_mode=mode, actuator_tau=tau))
            metrics = segment_metrics(trace)
            e_rms = float(np.sqrt(np.mean(np.square(trace["y_e"]))))
            rows.append((tau, code, e_rms, max(m.E_RNG for m in metrics),
                         float(np.sqrt(np.mean(np.square(trace["a_lat"] - trace["a_ref"]))))))
    return FigureData("lag", ("tau", "mode", "E_RMS", "E_RNG_max", "A_RMS"), np.array(rows),
                      {"modes": ["backstepping", "passthrough"]})


FIGURES = {
    "slip_mismatch": slip_mismatch_curve,
    "saturation": saturation_contours,
    "constant_c": constant_c_sweep,
    "c_limit": admissible_c,
    "phase": phase_portraits,
    "lyapunov": lyapunov_rate_curve,
    "noise": observer_noise_tradeoff,
    "peaking": peaking_study,
    "lag": actuator_lag_study,
}
SCENARIO_FIGURES = ("peaking", "lag")
