"""Report figures written next to the CSV/JSON outputs of the CLI.

Figures are built on bare ``Figure`` objects (no pyplot state) and saved as
PNG without a software stamp, so equal data gives equal bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

DPI = 100


def _save(fig: Figure, path: str | Path) -> Path:
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    return Path(path)


def figure_path(report: str | Path) -> Path:
    """``out/traj.csv`` -> ``out/traj.png``."""
    return Path(report).with_suffix(".png")


def plot_trajectory(records, path: str | Path) -> Path:
    """Total energy (log scale) and sphericity against iteration."""
    steps = [r for r in records if r.kind != "gauge"]
    it = np.array([r.iteration for r in steps])
    total = np.array([r.total for r in steps])
    sph = np.array([r.sphericity for r in steps])
    fig = Figure(figsize=(7.0, 3.0))
    ax1, ax2 = fig.subplots(1, 2)
    positive = total > 0
    if positive.all():
        ax1.semilogy(it, total, lw=1.2)
    else:
        ax1.plot(it, total, lw=1.2)
    gauges = [r for r in records if r.kind == "gauge"]
    if gauges:
        ax1.plot([r.iteration for r in gauges], [r.total for r in gauges], "o", ms=3, label="gauge")
        ax1.legend(frameon=False, fontsize=8)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("energy")
    ax2.plot(it, sph, lw=1.2, color="C2")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("sphericity (std/mean radius)")
    return _save(fig, path)


def plot_invariance(rows: Sequence[dict], path: str | Path) -> Path:
    """E0 and Willmore term per random Moebius trial, relative to their means."""
    trial = np.array([r["trial"] for r in rows])
    fig = Figure(figsize=(5.0, 3.0))
    ax = fig.subplots()
    for key, marker in (("e0", "o"), ("willmore", "s")):
        v = np.array([r[key] for r in rows], dtype=float)
        mean = np.mean(v)
        rel = v / mean - 1.0 if mean != 0 else v
        ax.plot(trial, rel, marker, ms=4, label=key)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("trial")
    ax.set_ylabel("relative deviation from mean")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_cover(report, path: str | Path) -> Path:
    """Ball radius against biLipschitz constant, colored by sheet count."""
    r = np.array([b.radius for b in report.balls])
    bl = np.array([b.max_bilip for b in report.balls])
    sc = np.array([b.sheet_count for b in report.balls])
    fig = Figure(figsize=(5.0, 3.0))
    ax = fig.subplots()
    for k in np.unique(sc):
        sel = sc == k
        ax.plot(r[sel], bl[sel], "o", ms=4, label=f"{k} sheet{'s' if k != 1 else ''}")
    ax.axhline(1.0 + 0.5 * report.delta, color="0.6", lw=0.8, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("ball radius")
    ax.set_ylabel("max biLipschitz")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_diskpair(r: float, eps: float, integrand, path: str | Path) -> Path:
    """Radial integrand of the disk-pair integral; its peak sits near t = eps."""
    t = np.linspace(0.0, 2.0 * r, 2001)[1:]
    fig = Figure(figsize=(5.0, 3.0))
    ax = fig.subplots()
    ax.loglog(t, integrand(t, r, eps), lw=1.2)
    ax.axvline(eps, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("offset t")
    ax.set_ylabel("integrand")
    return _save(fig, path)


def plot_shape(shape, path: str | Path) -> Path:
    """Orthographic xy view of a curve, a sphere mesh image or a surface patch."""
    fig = Figure(figsize=(3.5, 3.5))
    ax = fig.subplots()
    if hasattr(shape, "points") and not hasattr(shape, "faces"):
        p = np.vstack([shape.points, shape.points[:1]])
        ax.plot(p[:, 0], p[:, 1], lw=1.0)
    else:
        p = shape.image if hasattr(shape, "image") else shape.points
        ax.triplot(p[:, 0], p[:, 1], shape.faces, lw=0.2)
    ax.set_aspect("equal")
    ax.set_axis_off()
    return _save(fig, path)
