class SteeringSimError(Exception):
    """Base class for every error raised by the steering toolkit."""


class ConfigError(SteeringSimError):
    """A scenario file is malformed or misses a required field."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class ParameterError(SteeringSimError):
    """Vehicle parameters or controller gains violate their invariants."""


class PathError(SteeringSimError):
    """A path specification is discontinuous or exceeds the curvature bound."""


class SingularSpeedError(SteeringSimError):
    """The rear-slip resolution is singular at the requested speed."""


class ProjectionLostError(SteeringSimError):
    """The vehicle can no longer be projected onto the reference path."""


class NonFiniteStateError(SteeringSimError):
    """A simulated state became NaN or infinite."""


class ObserverStiffnessError(SteeringSimError):
    """The observer step is too coarse for its gain scale."""


class InfeasibleGainsError(SteeringSimError):
    """Requested tuning would exceed the actuator limits."""


class RunAbortedError(SteeringSimError):
    """A simulation run stopped before completion."""

    def __init__(self, reason: SteeringSimError, t: float, step: int):
        self.reason = reason
        self.t = t
        self.step = step
        super().__init__(f"run aborted at t={t:.2f}s (step {step}): {type(reason).__name__}: {reason}")
