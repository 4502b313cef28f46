import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import config

logger = logging.getLogger(__name__)

# Fixed element ids and no timestamp keep repeated SVG output byte-identical.
matplotlib.rcParams["svg.hashsalt"] = config.SVG_HASH_SALT
SVG_METADATA = {"Date": None}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"[Drawing] ✅ Saved {path}")
    return path


def line_chart(path: str, series, title: str, xlabel: str, ylabel: str, hline: float | None = None) -> str:
    """
    Draws (label, x, y) series on shared axes.

    Args:
        path (str): Destination SVG file.
        series (list): Tuples (label, x, y).
        hline (float | None): Optional horizontal reference level.
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, x, y in series:
        ax.plot(x, y, label=label, linewidth=1.2)
    if hline is not None:
        ax.axhline(hline, color="0.5", linewidth=0.8, linestyle="--")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, linewidth=0.3)
    if sum(label is not None for label, _, _ in series) > 1:
        ax.legend(fontsize=8)
    return _save(fig, path)


def contour_panels(path: str, panels, x, y, title: str, xlabel: str, ylabel: str, level: float) -> str:
    """One filled contour per (label, Z) panel, with Z rows indexed by y."""
    n = len(panels)
    cols = min(3, n)
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3.4 * rows), squeeze=False)
    for ax, (label, Z) in zip(axes.flat, panels):
        top = max(float(np.max(Z)), level) * 1.01 + 1e-9
        ax.contourf(x, y, Z, levels=[0.0, level, top], colors=["#9ecae1", "#fdd0a2"])
        ax.contour(x, y, Z, levels=[level], colors="k", linewidths=0.8)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
    for ax in list(axes.flat)[n:]:
        ax.axis("off")
    fig.suptitle(title)
    return _save(fig, path)


def bar_chart(path: str, categories, groups: dict, title: str, ylabel: str, errors: dict | None = None) -> str:
    """Grouped bars: one group per category, one bar per key of groups."""
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(categories) * max(1, len(groups))), 4))
    width = 0.8 / max(1, len(groups))
    x = np.arange(len(categories))
    for i, (label, values) in enumerate(groups.items()):
        err = None if errors is None else errors.get(label)
        ax.bar(x + i * width - 0.4 + width / 2, values, width, yerr=err, label=label, capsize=2)
    ax.set_xticks(x)
    ax.set_xticklabels(categories)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(True, axis="y", linewidth=0.3)
    if len(groups) > 1:
        ax.legend(fontsize=8)
    return _save(fig, path)


def trace_chart(trace, path: str) -> str:
    t = trace["t"]
    return line_chart(path, [("y_e", t, trace["y_e"])], f"Lateral error ({trace.meta.get('controller')})",
                      "t [s]", "y_e [m]", hline=0.0)


def _split(data, key: str):
    keys = data.column(key)
    for value in dict.fromkeys(keys.tolist()):
        yield value, keys == value


def figure_chart(data, path: str) -> str:
    """Renders a studies.FigureData table."""
    name = data.name
    if name == "slip_mismatch":
        v = data.column("v")
        return line_chart(path, [("nominal", v, data.column("delta_ar_nominal")),
                                 ("perturbed", v, data.column("delta_ar_perturbed"))],
                          "Sideslip mismatch at the curvature limit", "v [m/s]", "delta_ar [rad]", hline=0.0)
    if name == "saturation":
        panels = []
        x = y = None
        for key in dict.fromkeys(zip(data.column("c").tolist(), data.column("v").tolist())):
            sel = (data.column("c") == key[0]) & (data.column("v") == key[1])
            x = np.unique(data.column("y_e")[sel])
            y = np.unique(data.column("theta_e")[sel])
            Z = np.abs(data.column("omega")[sel]).reshape(y.size, x.size)
            panels.append((f"c={key[0]:g}, v={key[1]:g} m/s", Z))
        return contour_panels(path, panels, x, y, "Steering-rate saturation", "y_e [m]", "theta_e [rad]",
                              config.OMEGA_MAX)
    if name == "constant_c":
        series = [(f"c={data.column('c')[sel][0]:g}, y0={data.column('y_e0')[sel][0]:g}",
                   data.column("t")[sel], data.column("y_e")[sel]) for _, sel in _split(data, "series")]
        return line_chart(path, series, "Constant-c convergence", "t [s]", "y_e [m]", hline=0.0)
    if name == "c_limit":
        series = [(f"y0={y0:g} m", data.column("v")[sel], data.column("c_max")[sel]) for y0, sel in _split(data, "y_e0")]
        return line_chart(path, series, "Largest admissible c", "v [m/s]", "c [1/s]")
    if name == "phase":
        series = [(None, data.column("theta_bar_e")[sel], data.column("y_e")[sel]) for _, sel in _split(data, "run")]
        return line_chart(path, series, "Phase portraits", "theta_bar_e [rad]", "y_e [m]")
    if name == "lyapunov":
        S = data.column("S_kin")
        return line_chart(path, [("dW/dt", S, data.column("W_kin_dot"))], "Kinematic Lyapunov derivative",
                          "S_kin", "dW_kin/dt", hline=0.0)
    if name == "noise":
        return line_chart(path, [("beta_hat", data.column("eps"), data.column("beta_hat_std"))],
                          "Observer noise against eps", "eps", "std [rad]")
    if name == "peaking":
        return bar_chart(path, ["beta_hat peak", "r_kin peak"],
                         {mode: data.rows[i, [1, 3]] for i, mode in enumerate(data.meta["modes"])},
                         "Observer peaking", "magnitude")
    if name == "lag":
        taus = [f"{t:g}" for t in np.unique(data.column("tau"))]
        groups = {mode: data.column("E_RMS")[data.column("mode") == i] for i, mode in enumerate(data.meta["modes"])}
        return bar_chart(path, taus, groups, "Actuator lag", "E_RMS [m]")
    raise ValueError(f"no chart for figure '{name}'")
