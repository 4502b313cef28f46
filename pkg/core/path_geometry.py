import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import fixed_quad

import config
from core.exceptions import PathError
from core.vehicle import wrap_angle

logger = logging.getLogger(__name__)

LINE, ARC, CLOTHOID = "line", "arc", "clothoid"
QUAD_TOL = 1e-8
TANGENT_TOL = 1e-9


@dataclass(frozen=True)
class PathSegment:
    kind: str
    length: float
    kappa_start: float = 0.0
    kappa_end: float = 0.0
    label: str = ""
    start_pose: tuple | None = None

    def __post_init__(self):
        if self.kind not in (LINE, ARC, CLOTHOID):
            raise PathError(f"unknown segment kind '{self.kind}'")
        if not self.length > 0:
            raise PathError(f"segment '{self.label}' must have positive length, got {self.length}")
        if self.kind == LINE and (self.kappa_start != 0 or self.kappa_end != 0):
            raise PathError(f"line segment '{self.label}' must have zero curvature")
        if self.kind == ARC and (self.kappa_start != self.kappa_end or self.kappa_start == 0):
            raise PathError(f"arc segment '{self.label}' needs equal nonzero curvature at both ends")
        peak = max(abs(self.kappa_start), abs(self.kappa_end))
        if peak > config.KAPPA_LIMIT:
            raise PathError(f"segment '{self.label}' curvature {peak:.4f} exceeds {config.KAPPA_LIMIT}")

    @property
    def sharpness(self) -> float:
        """Curvature rate dkappa/ds (zero for lines and arcs)."""
        return (self.kappa_end - self.kappa_start) / self.length

    @property
    def sweep(self) -> float:
        """Total heading change over the segment."""
        return 0.5 * (self.kappa_start + self.kappa_end) * self.length

    def curvature(self, u: float) -> float:
        return self.kappa_start + self.sharpness * u

    def heading(self, theta0: float, u: float) -> float:
        return theta0 + self.kappa_start * u + 0.5 * self.sharpness * u ** 2

    def offset(self, theta0: float, u: float) -> tuple:
        """Displacement (dx, dy) from the segment start after arc length u."""
        if self.kind == LINE:
            return u * math.cos(theta0), u * math.sin(theta0)
        if self.kind == ARC:
            k = self.kappa_start
            theta = theta0 + k * u
            return (math.sin(theta) - math.sin(theta0)) / k, (math.cos(theta0) - math.cos(theta)) / k
        z = _adaptive_gauss_legendre(lambda t: np.exp(1j * self.heading(theta0, t)), 0.0, u, QUAD_TOL)
        return z.real, z.imag


def _adaptive_gauss_legendre(func, a: float, b: float, tol: float, depth: int = 0) -> complex:
    """Integrates func over [a, b] by bisection until halves agree with the whole to tol."""
    if b <= a:
        return 0.0 + 0.0j
    whole = fixed_quad(func, a, b, n=8)[0]
    mid = 0.5 * (a + b)
    left = fixed_quad(func, a, mid, n=8)[0]
    right = fixed_quad(func, mid, b, n=8)[0]
    if abs(whole - (left + right)) <= tol or depth >= 30:
        return left + right
    return (_adaptive_gauss_legendre(func, a, mid, tol / 2, depth + 1)
            + _adaptive_gauss_legendre(func, mid, b, tol / 2, depth + 1))


@dataclass(frozen=True)
class RefSample:
    s: float
    x_ref: float
    y_ref: float
    theta_ref: float
    kappa_ref: float
    seg_index: int
    clamped: bool = False
    kappa_slope: float = 0.0

    @property
    def tangent(self) -> np.ndarray:
        return np.array([math.cos(self.theta_ref), math.sin(self.theta_ref)])

    @property
    def normal(self) -> np.ndarray:
        """Left normal of the reference tangent."""
        return np.array([-math.sin(self.theta_ref), math.cos(self.theta_ref)])


@dataclass
class Path:
    """
    An open, G1-continuous chain of line, arc and clothoid segments.

    Segment start poses and cumulative arc lengths are resolved once at build time.
    """
    segments: list
    origin: tuple = (0.0, 0.0, 0.0)
    starts: list = field(default_factory=list)
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def total_length(self) -> float:
        return float(self.offsets[-1])

    def segment_bounds(self):
        """List of (label, s_start, s_end) per segment."""
        return [(seg.label or f"seg{i + 1}", float(self.offsets[i]), float(self.offsets[i + 1]))
                for i, seg in enumerate(self.segments)]

    def locate(self, s: float) -> int:
        index = int(np.searchsorted(self.offsets, s, side="right")) - 1
        return min(max(index, 0), len(self.segments) - 1)

    def sample(self, s: float) -> RefSample:
        clamped = False
        if s < 0.0 or s > self.total_length:
            clamped = True
            s = min(max(s, 0.0), self.total_length)
        index = self.locate(s)
        seg = self.segments[index]
        x0, y0, theta0 = self.starts[index]
        u = s - self.offsets[index]
        dx, dy = seg.offset(theta0, u)
        return RefSample(
            s=float(s),
            x_ref=x0 + dx,
            y_ref=y0 + dy,
            theta_ref=float(wrap_angle(seg.heading(theta0, u))),
            kappa_ref=seg.curvature(u),
            seg_index=index,
            clamped=clamped,
            kappa_slope=seg.sharpness,
        )

    def polyline(self, step: float = 0.5) -> np.ndarray:
        """Reference samples as rows (s, x, y, theta, kappa) every step metres."""
        grid = np.append(np.arange(0.0, self.total_length, step), self.total_length)
        rows = []
        for s in grid:
            ref = self.sample(s)
            rows.append((ref.s, ref.x_ref, ref.y_ref, ref.theta_ref, ref.kappa_ref))
        return np.array(rows)


def build_path(segments, origin=(0.0, 0.0, 0.0)) -> Path:
    """
    Chains segments end to end from the origin pose.

    A segment carrying an explicit start_pose must match the end pose of its
    predecessor in position and tangent.
    """
    if not segments:
        raise PathError("a path needs at least one segment")
    starts = []
    offsets = [0.0]
    x, y, theta = map(float, origin)
    for i, seg in enumerate(segments):
        if seg.start_pose is not None:
            sx, sy, stheta = seg.start_pose
            if abs(float(wrap_angle(stheta - theta))) > TANGENT_TOL:
                raise PathError(f"tangent discontinuity at the start of segment '{seg.label or i + 1}'")
            if math.hypot(sx - x, sy - y) > 1e-6:
                raise PathError(f"position gap at the start of segment '{seg.label or i + 1}'")
        starts.append((x, y, theta))
        dx, dy = seg.offset(theta, seg.length)
        x, y = x + dx, y + dy
        theta = seg.heading(theta, seg.length)
        offsets.append(offsets[-1] + seg.length)
    logger.debug(f"[Path Builder] Built {len(segments)} segments, {offsets[-1]:.3f} m")
    return Path(segments=list(segments), origin=tuple(origin), starts=starts, offsets=np.array(offsets))


def segment_from_spec(spec: dict) -> PathSegment:
    """
    Builds one segment from a scenario entry.

    Arcs accept either (radius, sweep_deg) or (radius, length); when both a sweep and
    a length are given the length wins and the implied sweep is logged.
    """
    kind = str(spec["kind"]).lower()
    label = str(spec.get("label", ""))
    if kind == LINE:
        return PathSegment(LINE, float(spec["length"]), label=label)
    if kind == ARC:
        radius = float(spec["radius"])
        kappa = 1.0 / radius
        if "length" in spec:
            length = float(spec["length"])
            if "sweep_deg" in spec:
                implied = math.degrees(length / abs(radius))
                if abs(implied - float(spec["sweep_deg"])) > 0.5:
                    logger.warning(f"[Path Builder] Segment '{label}': stated length {length} m on R={radius} m "
                                   f"implies a {implied:.1f} deg sweep, not {spec['sweep_deg']} deg")
        else:
            length = abs(radius) * math.radians(float(spec["sweep_deg"]))
        return PathSegment(ARC, length, kappa, kappa, label=label)
    if kind == CLOTHOID:
        k0, k1 = float(spec["kappa_start"]), float(spec["kappa_end"])
        if "length" in spec:
            length = float(spec["length"])
        else:
            length = 2.0 * math.radians(float(spec["sweep_deg"])) / abs(k0 + k1)
        return PathSegment(CLOTHOID, length, k0, k1, label=label)
    raise PathError(f"unknown segment kind '{kind}'")


def l_path_segments():
    return [
        PathSegment(LINE, 40.0, label="seg1"),
        PathSegment(ARC, 50.0 * math.pi / 2, 0.02, 0.02, label="seg2"),
        PathSegment(LINE, 40.0, label="seg3"),
    ]


def s_path_segments(length: float = 100.0, kappa: float = 0.01):
    """Two mirrored clothoids turning from a right-hand to a left-hand radius."""
    return [
        PathSegment(CLOTHOID, length, -kappa, 0.0, label="seg1"),
        PathSegment(CLOTHOID, length, 0.0, kappa, label="seg2"),
    ]


def comprehensive_segments():
    specs = [
        {"label": "a1", "kind": LINE, "length": 120.0},
        {"label": "b1", "kind": ARC, "radius": 50.0, "sweep_deg": 225.0},
        {"label": "c1", "kind": CLOTHOID, "kappa_start": 0.02, "kappa_end": 0.0, "sweep_deg": 10.0},
        {"label": "d1", "kind": CLOTHOID, "kappa_start": 0.0, "kappa_end": -0.01, "sweep_deg": 10.0},
        {"label": "e1", "kind": ARC, "radius": -100.0, "sweep_deg": 20.0, "length": 17.5},
        {"label": "f1", "kind": ARC, "radius": 100.0, "sweep_deg": 20.0, "length": 17.5},
    ]
    return [segment_from_spec(spec) for spec in specs]


NAMED_PATHS = {
    "l_path": l_path_segments,
    "s_path": s_path_segments,
    "comprehensive": comprehensive_segments,
}
