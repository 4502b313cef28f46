"""
Scenario files: YAML documents with the sections vehicle, path, controller,
disturbances and run. Every optional field falls back to config.py.

    vehicle:
      truth: perturbed          # preset name or a full parameter mapping
      model: nominal
      preset: clear             # weather applied to the truth plant (clear | rainy)
    path:
      named: l_path             # or: segments: [{label, kind, length | radius + sweep_deg | kappa_start + kappa_end}]
    controller:
      name: PROP-S              # A | B | PROP | PROP-S
      feedback: output          # output (observer) | state (truth)
      kinematic: {preset: field, c0_mode: fixed}
      dynamic: {mode: backstepping, T_s: 1.0}   # or explicit K_p1, K_i1, K_p2, K_i2
      observer: {alpha1: 2, alpha2: 1, eps: 0.05, initial_offset: [0, 0]}
    disturbances:
      slope_grade: 0.0
      lateral_step: {time: 10.0, offset: 0.25}
      yaw_noise_std: 0.005
      pose_noise_std: 0.0
      delta_beta: 0.0
      delta_r: 0.0
    run:
      dt: 0.01
      substeps: 1               # integration refinement within each control period
      v_ss: 10.0                # or speed_profile: [[t, v], ...]
      ramp_time: 5.0
      duration: 40.0            # or path_end
      y_e0: 0.5
      theta_e0: 0.0
      seed: 0
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

import config
from core.baselines import BaselineAGains, BaselineBGains
from core.dynamic_controller import DynGains
from core.exceptions import ConfigError, ParameterError, PathError
from core.kinematic_controller import PROP, PROP_S, KinGains
from core.observer import HgoConfig
from core.path_geometry import NAMED_PATHS, segment_from_spec
from core.vehicle import VehicleParams

logger = logging.getLogger(__name__)

CONTROLLERS = ("A", "B", PROP, PROP_S)
VEHICLE_PRESETS = {"nominal": config.NOMINAL_VEHICLE, "perturbed": config.PERTURBED_VEHICLE}
SECTIONS = ("vehicle", "path", "controller", "disturbances", "run")


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-linear speed schedule through (t, v) knots, held after the last knot."""
    knots: tuple

    @classmethod
    def ramp(cls, v_ss: float, ramp_time: float) -> "SpeedProfile":
        if ramp_time <= 0:
            return cls(((0.0, v_ss),))
        return cls(((0.0, 0.0), (ramp_time, v_ss)))

    def speed(self, t: float) -> float:
        times = [k[0] for k in self.knots]
        speeds = [k[1] for k in self.knots]
        return float(np.interp(t, times, speeds))

    def acceleration(self, t: float) -> float:
        for (t0, v0), (t1, v1) in zip(self.knots, self.knots[1:]):
            if t0 <= t < t1:
                return (v1 - v0) / (t1 - t0)
        return 0.0

    @property
    def final_speed(self) -> float:
        return float(self.knots[-1][1])


@dataclass(frozen=True)
class Disturbances:
    slope_grade: float = 0.0
    step_time: float | None = None
    step_offset: float = 0.0
    yaw_noise_std: float = config.SIM_YAW_NOISE_STD
    pose_noise_std: float = config.SIM_POSE_NOISE_STD
    delta_beta: float = 0.0
    delta_r: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    segments: list
    truth_params: VehicleParams
    model_params: VehicleParams
    controller: str = PROP
    feedback: str = "output"
    kin_gains: KinGains = field(default_factory=KinGains)
    dyn_gains: DynGains | None = None
    dyn_T_s: float = config.DYN_STEER_SETTLING
    dyn_mode: str = "backstepping"
    actuator_tau: float = 0.0
    hgo: HgoConfig = field(default_factory=HgoConfig)
    observer_offset: tuple = (0.0, 0.0)
    baseline_a: BaselineAGains | None = None
    baseline_b: BaselineBGains = field(default_factory=BaselineBGains)
    speed_profile: SpeedProfile = field(default_factory=lambda: SpeedProfile.ramp(config.SIM_V_SS,
                                                                                config.SIM_RAMP_TIME))
    disturbances: Disturbances = field(default_factory=Disturbances)
    y_e0: float = config.SIM_Y_E0
    theta_e0: float = config.SIM_THETA_E0
    dt: float = config.SIM_DT
    substeps: int = 1
    duration: float | None = None
    seed: int = config.SIM_SEED
    weather: str = "clear"
    source: str | None = None

    def __post_init__(self):
        if not 0 < self.dt <= config.SIM_DT_MAX:
            raise ParameterError(f"dt must lie in (0, {config.SIM_DT_MAX}], got {self.dt}")
        if self.substeps < 1:
            raise ParameterError(f"substeps must be a positive integer, got {self.substeps}")
        if self.controller not in CONTROLLERS:
            raise ParameterError(f"unknown controller '{self.controller}', expected one of {CONTROLLERS}")
        if self.feedback not in ("output", "state"):
            raise ParameterError(f"unknown feedback mode '{self.feedback}'")
        if self.dyn_mode not in ("backstepping", "passthrough"):
            raise ParameterError(f"unknown dynamic mode '{self.dyn_mode}'")

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def with_weather(self, preset: str) -> "Scenario":
        """Re-derives the truth plant for a weather preset from the clear-weather truth."""
        if preset not in config.WEATHER_PRESETS:
            raise ParameterError(f"unknown weather preset '{preset}'")
        base = self.truth_params
        if self.weather != "clear":
            old = config.WEATHER_PRESETS[self.weather]
            base = base.with_weather(config.NOMINAL_VEHICLE["mu"], 1.0 / old["stiffness_scale"])
        weather = config.WEATHER_PRESETS[preset]
        return replace(self, truth_params=base.with_weather(weather["mu"], weather["stiffness_scale"]),
                       weather=preset)


def _key_lines(text: str) -> dict:
    """Maps dotted key paths of a YAML document to 1-based line numbers."""
    lines = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                dotted = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                lines[dotted] = key_node.start_mark.line + 1
                walk(value_node, dotted)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, f"{prefix}[{i}]")

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return lines


class _Reader:
    """Field access that reports missing or malformed entries by dotted name and line."""

    def __init__(self, data: dict, lines: dict):
        self.data = data
        self.lines = lines

    def line_of(self, dotted: str):
        while dotted:
            if dotted in self.lines:
                return self.lines[dotted]
            dotted = dotted.rpartition(".")[0]
        return None

    def section(self, name: str, required: bool = False) -> dict:
        value = self.data.get(name)
        if value is None:
            if required:
                raise ConfigError("required section is missing", field=name)
            return {}
        if not isinstance(value, dict):
            raise ConfigError("section must be a mapping", field=name, line=self.line_of(name))
        return value

    def get(self, section: dict, dotted: str, default=None, required: bool = False, cast=None):
        key = dotted.rpartition(".")[2]
        if key not in section or section[key] is None:
            if required:
                raise ConfigError("required field is missing", field=dotted, line=self.line_of(dotted.rpartition(".")[0]))
            return default
        value = section[key]
        if cast is not None:
            try:
                value = cast(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid value {value!r}: {e}", field=dotted, line=self.line_of(dotted))
        return value


def _vehicle(reader: _Reader, section: dict, key: str, default: str) -> VehicleParams:
    value = section.get(key, default)
    try:
        if isinstance(value, str):
            if value not in VEHICLE_PRESETS:
                raise ConfigError(f"unknown vehicle preset '{value}'", field=f"vehicle.{key}",
                                  line=reader.line_of(f"vehicle.{key}"))
            return VehicleParams.from_dict(VEHICLE_PRESETS[value])
        if isinstance(value, dict):
            base = dict(VEHICLE_PRESETS[value.get("base", default)])
            base.update({k: v for k, v in value.items() if k != "base"})
            return VehicleParams.from_dict(base)
    except (ParameterError, TypeError, ValueError) as e:
        raise ConfigError(str(e), field=f"vehicle.{key}", line=reader.line_of(f"vehicle.{key}"))
    raise ConfigError("expected a preset name or a parameter mapping", field=f"vehicle.{key}",
                      line=reader.line_of(f"vehicle.{key}"))


def _segments(reader: _Reader, section: dict):
    if "named" in section:
        name = section["named"]
        if name not in NAMED_PATHS:
            raise ConfigError(f"unknown named path '{name}'", field="path.named", line=reader.line_of("path.named"))
        return NAMED_PATHS[name]()
    specs = reader.get(section, "path.segments", required=True)
    if not isinstance(specs, list) or not specs:
        raise ConfigError("segments must be a nonempty list", field="path.segments",
                          line=reader.line_of("path.segments"))
    segments = []
    for i, spec in enumerate(specs):
        dotted = f"path.segments[{i}]"
        try:
            segments.append(segment_from_spec(spec))
        except KeyError as e:
            raise ConfigError("required field is missing", field=f"{dotted}.{e.args[0]}",
                              line=reader.line_of(dotted))
        except (PathError, TypeError, ValueError) as e:
            raise ConfigError(str(e), field=dotted, line=reader.line_of(dotted))
    return segments


def _build(reader: _Reader, cls, values: dict, dotted: str):
    try:
        return cls.from_dict(values)
    except (ParameterError, TypeError, ValueError) as e:
        raise ConfigError(str(e), field=dotted, line=reader.line_of(dotted))


def parse_scenario(data: dict, lines: dict | None = None, name: str = "scenario", source: str | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("scenario document must be a mapping")
    reader = _Reader(data, lines or {})
    for key in data:
        if key not in SECTIONS:
            raise ConfigError("unknown section", field=str(key), line=reader.line_of(str(key)))

    vehicle = reader.section("vehicle")
    truth = _vehicle(reader, vehicle, "truth", "perturbed")
    model = _vehicle(reader, vehicle, "model", "nominal")
    weather = reader.get(vehicle, "vehicle.preset", "clear", cast=str)
    if weather not in config.WEATHER_PRESETS:
        raise ConfigError(f"unknown weather preset '{weather}'", field="vehicle.preset",
                          line=reader.line_of("vehicle.preset"))
    preset = config.WEATHER_PRESETS[weather]
    truth = truth.with_weather(preset["mu"], preset["stiffness_scale"])

    segments = _segments(reader, reader.section("path", required=True))

    ctl = reader.section("controller", required=True)
    controller = reader.get(ctl, "controller.name", required=True, cast=str)
    if controller not in CONTROLLERS:
        raise ConfigError(f"unknown controller '{controller}'", field="controller.name",
                          line=reader.line_of("controller.name"))
    feedback = reader.get(ctl, "controller.feedback", "output", cast=str)
    kin = _build(reader, KinGains, ctl.get("kinematic") or {}, "controller.kinematic")
    dyn_section = dict(ctl.get("dynamic") or {})
    dyn_mode = str(dyn_section.pop("mode", "backstepping"))
    dyn_T_s = float(dyn_section.pop("T_s", config.DYN_STEER_SETTLING))
    actuator_tau = float(dyn_section.pop("actuator_tau", 0.0))
    dyn_gains = _build(reader, DynGains, dyn_section, "controller.dynamic") if dyn_section else None
    obs_section = dict(ctl.get("observer") or {})
    offset = tuple(float(v) for v in obs_section.pop("initial_offset", (0.0, 0.0)))
    hgo = _build(reader, HgoConfig, obs_section, "controller.observer")
    baseline_a = _build(reader, BaselineAGains, ctl["baseline_a"], "controller.baseline_a") \
        if ctl.get("baseline_a") else None
    baseline_b = _build(reader, BaselineBGains, ctl.get("baseline_b") or {}, "controller.baseline_b")

    dist = reader.section("disturbances")
    step = dist.get("lateral_step") or {}
    disturbances = Disturbances(
        slope_grade=reader.get(dist, "disturbances.slope_grade", 0.0, cast=float),
        step_time=float(step["time"]) if "time" in step else None,
        step_offset=float(step.get("offset", 0.0)),
        yaw_noise_std=reader.get(dist, "disturbances.yaw_noise_std", config.SIM_YAW_NOISE_STD, cast=float),
        pose_noise_std=reader.get(dist, "disturbances.pose_noise_std", config.SIM_POSE_NOISE_STD, cast=float),
        delta_beta=reader.get(dist, "disturbances.delta_beta", 0.0, cast=float),
        delta_r=reader.get(dist, "disturbances.delta_r", 0.0, cast=float),
    )

    run = reader.section("run", required=True)
    duration = reader.get(run, "run.duration", required=True)
    if duration == "path_end":
        duration = None
    else:
        duration = reader.get(run, "run.duration", cast=float)
    if "speed_profile" in run:
        try:
            knots = tuple((float(t), float(v)) for t, v in run["speed_profile"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"expected [t, v] pairs: {e}", field="run.speed_profile",
                              line=reader.line_of("run.speed_profile"))
        profile = SpeedProfile(knots)
    else:
        profile = SpeedProfile.ramp(reader.get(run, "run.v_ss", config.SIM_V_SS, cast=float),
                                    reader.get(run, "run.ramp_time", config.SIM_RAMP_TIME, cast=float))

    try:
        return Scenario(
            name=name, segments=segments, truth_params=truth, model_params=model, controller=controller,
            feedback=feedback, kin_gains=kin, dyn_gains=dyn_gains, dyn_T_s=dyn_T_s, dyn_mode=dyn_mode,
            actuator_tau=actuator_tau, hgo=hgo, observer_offset=offset, baseline_a=baseline_a,
            baseline_b=baseline_b, speed_profile=profile, disturbances=disturbances,
            y_e0=reader.get(run, "run.y_e0", config.SIM_Y_E0, cast=float),
            theta_e0=reader.get(run, "run.theta_e0", config.SIM_THETA_E0, cast=float),
            dt=reader.get(run, "run.dt", config.SIM_DT, cast=float),
            substeps=reader.get(run, "run.substeps", 1, cast=int),
            duration=duration,
            seed=reader.get(run, "run.seed", config.SIM_SEED, cast=int),
            weather=weather, source=source,
        )
    except ParameterError as e:
        raise ConfigError(str(e))


def load_scenario(path: str) -> Scenario:
    """Reads and validates a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read scenario file: {e}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}",
                          line=mark.line + 1 if mark is not None else None)
    name = path.replace("\\", "/").rsplit("/", 1)[-1].rsplit(".", 1)[0]
    scenario = parse_scenario(data, _key_lines(text), name=name, source=path)
    logger.info(f"[Scenario] ✅ Loaded '{name}' ({scenario.controller}, {len(scenario.segments)} segments)")
    return scenario


def default_scenario(path: str = "l_path", **overrides) -> Scenario:
    """Scenario on a named path with the default parameter sets, gains and run settings."""
    if path not in NAMED_PATHS:
        raise ConfigError(f"unknown named path '{path}'", field="path.named")
    fields = dict(
        name=path,
        segments=NAMED_PATHS[path](),
        truth_params=VehicleParams.from_dict(config.PERTURBED_VEHICLE),
        model_params=VehicleParams.from_dict(config.NOMINAL_VEHICLE),
    )
    fields.update(overrides)
    return Scenario(**fields)
