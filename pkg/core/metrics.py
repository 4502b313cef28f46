"""
Per-segment tracking indices and their batch aggregation.

Error metrics use every trace row whose s_ref falls in the segment; E_L10 uses the
last METRIC_LAST_N samples after decimating the segment to METRIC_RATE_HZ.
"""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import savgol_filter

import config
from core.exceptions import ParameterError

logger = logging.getLogger(__name__)

METRIC_NAMES = ("E_RMS", "E_RNG", "E_L10", "A_RMS")
MAINTAIN, TOUCH = "maintain", "touch"


@dataclass(frozen=True)
class SegmentMetrics:
    label: str
    E_RMS: float
    E_RNG: float
    E_L10: float
    converged: bool
    A_RMS: float
    n_samples: int
    short_segment: bool = False


@dataclass(frozen=True)
class SegmentAggregate:
    label: str
    n_runs: int
    E_RMS: tuple
    E_RNG: tuple
    E_L10: tuple
    A_RMS: tuple
    pct_converged: float


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def decimation_stride(t: np.ndarray, rate_hz: float = config.METRIC_RATE_HZ) -> int:
    if t.size < 2:
        return 1
    dt = float(np.median(np.diff(t)))
    return max(1, int(round(1.0 / (rate_hz * dt))))


def smooth_acceleration(a: np.ndarray, dt: float, window_s: float = config.SAVGOL_WINDOW_S,
                        order: int = config.SAVGOL_ORDER) -> np.ndarray:
    """Savitzky-Golay smoothing; short series are returned unchanged."""
    window = int(round(window_s / dt)) | 1
    if window <= order or a.size < window:
        return a
    return savgol_filter(a, window, order)


def segment_metrics(trace, bounds=None, rate_hz: float = config.METRIC_RATE_HZ,
                    last_n: int = config.METRIC_LAST_N, band: float = config.CONVERGENCE_BAND,
                    convergence: str = MAINTAIN, smooth: bool = False) -> list:
    """
    Tracking indices for each (label, s_start, s_end) segment of a trace.

    In the maintain mode a segment counts as converged when every sample from the
    start of the E_L10 window to the segment end stays within band; the touch mode
    only asks that some sample reaches the band.
    """
    if convergence not in (MAINTAIN, TOUCH):
        raise ParameterError(f"unknown convergence mode '{convergence}'")
    bounds = bounds if bounds is not None else trace.meta.get("segments")
    if not bounds:
        raise ParameterError("segment metrics need segment bounds")
    s = trace["s_ref"]
    t = trace["t"]
    results = []
    for i, (label, s0, s1) in enumerate(bounds):
        last = i == len(bounds) - 1
        mask = (s >= s0) & ((s <= s1) if last else (s < s1))
        if not np.any(mask):
            logger.warning(f"[Metrics] 🔴 WARNING: segment '{label}' has no trace samples")
            results.append(SegmentMetrics(label, math.nan, math.nan, math.nan, False, math.nan, 0, True))
            continue
        y = trace["y_e"][mask]
        seg_t = t[mask]
        a = trace["a_lat"][mask]
        if smooth and seg_t.size > 1:
            a = smooth_acceleration(a, float(np.median(np.diff(seg_t))))
        stride = decimation_stride(seg_t, rate_hz)
        idx = np.arange(y.size - 1, -1, -stride)[::-1]
        window = idx[-last_n:]
        short = idx.size < last_n
        if short:
            logger.info(f"[Metrics] Segment '{label}' has {idx.size} decimated samples, E_L10 uses all of them")
        within = np.abs(y) <= band
        if convergence == MAINTAIN:
            converged = bool(np.all(within[window[0]:]))
        else:
            converged = bool(np.any(within))
        results.append(SegmentMetrics(
            label=label,
            E_RMS=_rms(y),
            E_RNG=float(np.max(y) - np.min(y)),
            E_L10=_rms(y[window]),
            converged=converged,
            A_RMS=_rms(a - trace["a_ref"][mask]),
            n_samples=int(y.size),
            short_segment=short,
        ))
    return results


def mean_std(values) -> tuple:
    """Mean and sample standard deviation ignoring NaN entries."""
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1))


def aggregate(per_run: list) -> dict:
    """Joins per-run segment metrics into avg and std per segment plus %C."""
    if not per_run:
        raise ParameterError("aggregation needs at least one run")
    labels = [m.label for m in per_run[0]]
    table = {}
    for j, label in enumerate(labels):
        rows = [run[j] for run in per_run]
        stats = {name: mean_std([getattr(r, name) for r in rows]) for name in METRIC_NAMES}
        pct = 100.0 * sum(r.converged for r in rows) / len(rows)
        table[label] = SegmentAggregate(label=label, n_runs=len(rows), pct_converged=pct, **stats)
    return table


def aggregate_traces(traces, **metric_kwargs) -> dict:
    return aggregate([segment_metrics(tr, **metric_kwargs) for tr in traces if tr is not None])


@dataclass
class ComparisonReport:
    """Segment-by-metric table with one avg/std column pair per compared configuration."""
    columns: list
    rows: list

    def csv_rows(self):
        header = ["segment", "metric"]
        for col in self.columns:
            header += [f"{col} avg", f"{col} std"]
        out = [header]
        for row in self.rows:
            line = [row["segment"], row["metric"]]
            for col in self.columns:
                line += list(row["values"][col])
            out.append(line)
        return out

    def to_text(self) -> str:
        widths = max(14, *(len(c) + 2 for c in self.columns))
        lines = [f"{'segment':<10}{'metric':<8}" + "".join(f"{c:>{widths + 12}}" for c in self.columns)]
        for row in self.rows:
            cells = []
            for col in self.columns:
                avg, std = row["values"][col]
                cells.append(f"{avg:>{widths}.3f}" if row["metric"] == "%C" else f"{avg:>{widths}.3f} ± {std:<7.3f}")
            lines.append(f"{row['segment']:<10}{row['metric']:<8}" + "".join(f"{c:>{widths + 12}}" for c in cells))
        return "\n".join(lines)


def report(tables: dict) -> ComparisonReport:
    """
    Builds the comparison report from {column label: aggregate table}.

    Column order follows the dict; segment order follows the first table.
    """
    if not tables:
        raise ParameterError("report needs at least one aggregate")
    columns = list(tables)
    segments = list(next(iter(tables.values())))
    rows = []
    for seg in segments:
        for name in METRIC_NAMES + ("%C",):
            values = {}
            for col in columns:
                agg = tables[col].get(seg)
                if agg is None:
                    values[col] = (math.nan, math.nan)
                elif name == "%C":
                    values[col] = (agg.pct_converged, 0.0)
                else:
                    values[col] = getattr(agg, name)
            rows.append({"segment": seg, "metric": name, "values": values})
    return ComparisonReport(columns, rows)


def summarize_run(trace, **metric_kwargs) -> dict:
    """JSON-ready digest of one run."""
    phi = np.abs(trace["phi"])
    omega = np.abs(trace["omega"])
    r_kin = np.abs(trace["r_kin"])
    thr = trace["r_threshold"]
    summary = {
        "steps": len(trace),
        "t_end": trace.final("t"),
        "final_y_e": trace.final("y_e"),
        "max_abs_y_e": float(np.max(np.abs(trace["y_e"]))),
        "max_abs_x_e": float(np.max(np.abs(trace["x_e"]))),
        "max_abs_a_lat": float(np.max(np.abs(trace["a_lat"]))),
        "max_abs_phi": float(np.max(phi)),
        "max_abs_omega": float(np.max(omega)),
        "r_kin_within_threshold": bool(np.all(np.isnan(thr) | (r_kin <= thr + 1e-12))),
        "comfort_flags": int(np.nansum(trace["comfort_flag"])),
        "safety_flags": int(np.nansum(trace["safety_flag"])),
        "segments": [asdict(m) for m in segment_metrics(trace, **metric_kwargs)],
    }
    return summary
