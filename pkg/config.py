# --- Physical Constants ---
GRAVITY = 9.81

# --- Vehicle Parameter Sets ---
# Nominal values of the test vehicle.
NOMINAL_VEHICLE = {
    "m": 2540.0,
    "J": 5000.0,
    "L_f": 1.5,
    "L_r": 1.5,
    "C_f": 230e3,
    "C_r": 200e3,
    "mu": 0.8,
    "v_eps": 0.5,
}
# Perturbed (estimated) set the simulated vehicle runs with.
PERTURBED_VEHICLE = {
    "m": 2300.0,
    "J": 4500.0,
    "L_f": 1.4,
    "L_r": 1.6,
    "C_f": 110e3,
    "C_r": 110e3,
    "mu": 0.8,
    "v_eps": 0.5,
}

# --- Weather Presets ---
# Applied to the truth plant only; the controller keeps its belief parameters.
WEATHER_PRESETS = {
    "clear": {"mu": 0.8, "stiffness_scale": 1.0},
    "rainy": {"mu": 0.5, "stiffness_scale": 0.7},
}

# --- Actuator Limits ---
PHI_MAX_DEG = 35.0
OMEGA_MAX = 0.3

# --- Kinematic Controller Settings ---
KIN_C0 = 0.05
KIN_C_SS = 3.0
KIN_T_END = 4.0
KIN_K_I = 0.1
KIN_PSI = 0.1
# Boundary layer keeping the reaching rate psi/eps above the steady convergence gain.
KIN_EPS = 0.01
KIN_A1 = 0.9
KIN_K1 = 0.8
KIN_K2 = 0.49
KIN_K_F = 1.0
KIN_R_THRESHOLD_CAP = 0.3
KIN_C_FLOOR = 0.05
# Curvature bound shared by the path builder and the safety check.
KAPPA_LIMIT = 0.0658
KAPPA_MAX_CAP = 0.03
KAPPA_MAX_ACCEL = 3.13

# Gain presets selectable from a scenario file.
KIN_PRESETS = {
    "field": {"K_i": 0.1, "c_ss": 3.0},
    "gentle": {"K_i": 0.04, "c0": 0.65, "c_ss": 0.65, "psi_kin": 0.1, "eps_kin": 0.1},
}

# --- Dynamic Controller Settings ---
DYN_STEER_SETTLING = 1.0
DYN_DESIGN_SPEED = 10.0

# --- Observer Settings ---
HGO_ALPHA1 = 2.0
HGO_ALPHA2 = 1.0
HGO_EPS = 0.05
HGO_EPS_MAX = 0.2

# --- Baseline Settings ---
BASELINE_A_TUNE_SPEED = 7.0
BASELINE_A_SETTLING = 4.0
BASELINE_A_INNER_SETTLING = 2.0
BASELINE_A_DERIV_TAU = 0.05
# Non-slip law differentiates its reference by backward difference, so its switching stays wide.
BASELINE_B_EPS_KIN = 0.1

# --- Simulation Settings ---
SIM_DT = 0.01
SIM_DT_MAX = 0.05
SIM_V_SS = 10.0
SIM_RAMP_TIME = 5.0
SIM_Y_E0 = 0.5
SIM_THETA_E0 = 0.0
SIM_YAW_NOISE_STD = 0.005
SIM_POSE_NOISE_STD = 0.0
SIM_SEED = 0
SLOPE_GRADE_MEB = 0.10
PROJECTION_WINDOW_MARGIN = 2.0
PROJECTION_LOST_OFFSET = 10.0
# Plant substeps are sized so dt_sub times the fastest tire pole stays below this.
PLANT_STIFFNESS_STEP = 1.0

# --- Metrics Settings ---
METRIC_RATE_HZ = 10.0
METRIC_LAST_N = 10
CONVERGENCE_BAND = 0.1
SAVGOL_WINDOW_S = 0.5
SAVGOL_ORDER = 3

# --- Batch Settings ---
BATCH_SEEDS = 10
BATCH_WORKERS = 1

# --- Output Settings ---
TOOL_VERSION = "1.0.0"
SUMMARY_SCHEMA_VERSION = 1
SVG_HASH_SALT = "lateral-steering"
