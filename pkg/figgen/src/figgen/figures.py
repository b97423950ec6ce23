"""The six figure renderers.

Each takes the input directory and an output path and writes one image.
Rendering goes through explicit Figure objects (no pyplot state), so output
bytes depend only on the input files.
"""

import glob
import os

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from . import flowfields, readers

DPI = 130


def _new_figure(width, height):
    fig = Figure(figsize=(width, height), dpi=DPI)
    FigureCanvasAgg(fig)
    return fig


def _save(fig, out_path):
    fig.savefig(out_path, dpi=DPI, format=_format_of(out_path))


def _format_of(path):
    ext = os.path.splitext(path)[1].lstrip(".").lower()
    return ext or "png"


def stability_norms(in_dir, out_path):
    """Two panels: L2 and H1 norms of the vorticity against time."""
    data = readers.read_series(os.path.join(in_dir, "series.csv"))
    fig = _new_figure(9.5, 3.6)
    for ax, col, label in zip(
        fig.subplots(1, 2), ("l2_omega", "h1_omega"), (r"$\|\omega\|_{L^2}$", r"$\|\nabla\omega\|_{L^2}$")
    ):
        ax.plot(data["t"], data[col], lw=0.9)
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, out_path)


def mode_trace(in_dir, out_path):
    """Real and imaginary part of the tracked Fourier coefficient."""
    data = readers.read_series(os.path.join(in_dir, "series.csv"))
    fig = _new_figure(9.5, 5.2)
    axes = fig.subplots(2, 1, sharex=True)
    axes[0].plot(data["t"], data["mode_re"], lw=0.8)
    axes[0].set_ylabel("Re")
    axes[1].plot(data["t"], data["mode_im"], lw=0.8, color="tab:orange")
    axes[1].set_ylabel("Im")
    axes[1].set_xlabel("t")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, out_path)


def max_vorticity(in_dir, out_path):
    """Maximum vorticity magnitude against time."""
    data = readers.read_series(os.path.join(in_dir, "series.csv"))
    fig = _new_figure(9.5, 3.6)
    ax = fig.subplots()
    ax.plot(data["t"], data["max_omega"], lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\max|\omega|$")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, out_path)


def intervals_bar(in_dir, out_path):
    """Bar chart of the time intervals between consecutive bursts."""
    data = readers.read_table(os.path.join(in_dir, "intervals.csv"), ("index", "interval"))
    fig = _new_figure(7.0, 3.8)
    ax = fig.subplots()
    ax.bar(data["index"], data["interval"], width=0.8)
    ax.set_xlabel("burst number")
    ax.set_ylabel("interval")
    fig.tight_layout()
    _save(fig, out_path)


def psd(in_dir, out_path):
    """Power spectral density on a log-log scale (zero-frequency bin dropped)."""
    data = readers.read_table(os.path.join(in_dir, "psd.csv"), ("freq", "power"))
    freq, power = data["freq"], data["power"]
    mask = freq > 0
    fig = _new_figure(7.0, 4.2)
    ax = fig.subplots()
    if mask.any() and np.any(power[mask] > 0):
        ax.loglog(freq[mask], power[mask], lw=0.8)
    else:
        ax.plot(freq, power, lw=0.8)
    ax.set_xlabel("frequency")
    ax.set_ylabel("power")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    _save(fig, out_path)


def _snapshot_paths(in_dir, times):
    snap_dir = os.path.join(in_dir, "snapshots")
    if times:
        paths = [os.path.join(snap_dir, f"omega_{t:g}.fsav") for t in times]
        missing = [p for p in paths if not os.path.exists(p)]
        if missing:
            raise readers.InputError(f"missing snapshots: {missing}")
        return paths
    paths = sorted(glob.glob(os.path.join(snap_dir, "omega_*.fsav")))
    if not paths:
        raise readers.InputError(f"no snapshots under {snap_dir}")
    if len(paths) > 6:
        idx = np.linspace(0, len(paths) - 1, 6).round().astype(int)
        paths = [paths[i] for i in idx]
    return paths


def burst_snapshots(in_dir, out_path, times=()):
    """Vorticity contours with velocity arrows at the selected times."""
    paths = _snapshot_paths(in_dir, times)
    n = len(paths)
    ncols = min(3, n)
    nrows = (n + ncols - 1) // ncols
    fig = _new_figure(3.6 * ncols, 3.4 * nrows)
    axes = np.atleast_1d(fig.subplots(nrows, ncols)).ravel()
    for ax in axes[n:]:
        ax.set_visible(False)
    for ax, path in zip(axes, paths):
        meta, omega = readers.read_snapshot(path)
        nx, ny = omega.shape
        x = meta["lx"] * np.arange(nx) / nx
        y = meta["ly"] * np.arange(ny) / ny
        # pcolormesh-style contours want (ny, nx)-shaped values
        cs = ax.contourf(x, y, omega.T, levels=24, cmap="RdBu_r")
        u1, u2 = flowfields.velocity_from_vorticity(omega, meta["lx"], meta["ly"])
        stride = max(nx // 16, 1)
        ax.quiver(
            x[::stride], y[::stride],
            u1[::stride, ::stride].T, u2[::stride, ::stride].T,
            color="k", scale_units="xy", angles="xy", width=0.004,
        )
        ax.set_title(f"t = {meta['t']:g}", fontsize=9)
        ax.set_aspect("equal")
        fig.colorbar(cs, ax=ax, shrink=0.85)
    fig.tight_layout()
    _save(fig, out_path)


RENDERERS = {
    "stability_norms": stability_norms,
    "mode_trace": mode_trace,
    "max_vorticity": max_vorticity,
    "intervals_bar": intervals_bar,
    "psd": psd,
    "burst_snapshots": burst_snapshots,
}
