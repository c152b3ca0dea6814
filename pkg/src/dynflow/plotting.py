"""Deterministic SVG figures: arrow plots, wireframes, heatmaps and residual histories.

Every figure is an 800x800 px canvas.  SVG element ids are derived from a
fixed salt and the date stamp is suppressed, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure
import numpy as np

from .expr import FlowField

CANVAS_PX = 800
DPI = 72
_RC = {"svg.hashsalt": "dynflow", "svg.fonttype": "path", "path.simplify": False}


def _figure() -> tuple[Figure, object]:
    fig = Figure(figsize=(CANVAS_PX / DPI, CANVAS_PX / DPI), dpi=DPI)
    ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", dpi=DPI, metadata={"Date": None})


def field_arrows(field: FlowField, lo: Sequence[float], hi: Sequence[float], density: int):
    """Node positions, arrow vectors scaled to the cell size, and the nonzero mask."""
    if field.dim != 2:
        raise ValueError(f"arrow plots need a 2-D field, got dim {field.dim}")
    if density < 2:
        raise ValueError("density must be >= 2")
    xs = np.linspace(lo[0], hi[0], density)
    ys = np.linspace(lo[1], hi[1], density)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    vec = field.evaluate(pts)
    mag = np.linalg.norm(vec, axis=1)
    peak = float(mag.max())
    cell = min((hi[0] - lo[0]), (hi[1] - lo[1])) / (density - 1)
    scaled = vec * (0.9 * cell / peak) if peak > 0 else np.zeros_like(vec)
    return pts, scaled, mag > 0


def plot_field_svg(field: FlowField, lo: Sequence[float], hi: Sequence[float], density: int, path,
                   title: str | None = None) -> int:
    """Arrow plot of a planar field; arrows scaled by the window maximum.  Returns the arrow count."""
    pts, vec, nonzero = field_arrows(field, lo, hi, density)
    fig, ax = _figure()
    ax.scatter(pts[:, 0], pts[:, 1], s=4, color="0.4", gid="nodes")
    if nonzero.any():
        p, v = pts[nonzero], vec[nonzero]
        ax.quiver(p[:, 0], p[:, 1], v[:, 0], v[:, 1], angles="xy", scale_units="xy", scale=1.0,
                  width=0.003, color="tab:blue", gid="arrows")
    pad = 0.05 * max(hi[0] - lo[0], hi[1] - lo[1])
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    _save(fig, path)
    return int(nonzero.sum())


def orthographic(points: np.ndarray, elev: float = 30.0, azim: float = -60.0) -> np.ndarray:
    """Project ``(..., 3)`` points onto the view plane; returns ``(..., 2)``."""
    a, e = np.radians(azim), np.radians(elev)
    right = np.array([-np.sin(a), np.cos(a), 0.0])
    up = np.array([-np.sin(e) * np.cos(a), -np.sin(e) * np.sin(a), np.cos(e)])
    return np.stack([points @ right, points @ up], axis=-1)


def wireframe_segments(coords: np.ndarray, elev: float = 30.0, azim: float = -60.0) -> list[np.ndarray]:
    """Projected parameter lines of a surface given as ``(3, M+1, M+1)`` coordinates."""
    if coords.shape[0] != 3:
        raise ValueError(f"wireframes need a surface in 3-D, got dim {coords.shape[0]}")
    flat = orthographic(np.moveaxis(coords, 0, -1), elev, azim)
    return [flat[i, :] for i in range(flat.shape[0])] + [flat[:, j] for j in range(flat.shape[1])]


def plot_surface_svg(coords: np.ndarray, path, elev: float = 30.0, azim: float = -60.0,
                     title: str | None = None) -> None:
    lines = wireframe_segments(np.asarray(coords, float), elev, azim)
    fig, ax = _figure()
    ax.add_collection(LineCollection(lines, linewidths=0.6, colors="k", gid="wireframe"))
    allpts = np.concatenate(lines)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pad = 0.05 * max(float(np.max(hi - lo)), 1e-12)
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_aspect("equal")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_grid_svg(values: np.ndarray, lo: Sequence[float], hi: Sequence[float], path,
                  title: str | None = None) -> None:
    """Heatmap of a 2-D nodal grid (``values[i, j]`` at ``(x1_i, x2_j)``)."""
    values = np.asarray(values, float)
    if values.ndim != 2:
        raise ValueError("heatmaps need a 2-D grid")
    xs = np.linspace(lo[0], hi[0], values.shape[0])
    ys = np.linspace(lo[1], hi[1], values.shape[1])
    fig, ax = _figure()
    mesh = ax.pcolormesh(xs, ys, values.T, shading="nearest", cmap="viridis", gid="grid")
    fig.colorbar(mesh, ax=ax, shrink=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_history_svg(series: Mapping[str, Sequence[float]], path, log: bool = True,
                     title: str | None = None) -> None:
    fig, ax = _figure()
    for name, values in series.items():
        v = np.asarray(values, float)
        ax.plot(np.arange(v.size), v, label=name, linewidth=1.0)
    if log:
        ax.set_yscale("log")
    ax.set_xlabel("sweep")
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_verdicts_svg(table, path) -> None:
    """Integral versus differential residual per trial, log-log, with the agreement bands."""
    floor = table.tol * 1e-6
    x = np.array([max(abs(r.integral), floor) for r in table.rows])
    y = np.array([max(abs(r.differential), floor) for r in table.rows])
    ok = np.array([r.agree for r in table.rows], dtype=bool)
    fig, ax = _figure()
    if ok.any():
        ax.scatter(x[ok], y[ok], s=12, color="tab:green", label="agree", gid="agree")
    if (~ok).any():
        ax.scatter(x[~ok], y[~ok], s=16, color="tab:red", marker="x", label="disagree", gid="disagree")
    for v in (table.tol, 10 * table.tol):
        ax.axvline(v, color="0.5", linewidth=0.6, linestyle="--")
        ax.axhline(v, color="0.5", linewidth=0.6, linestyle="--")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("integral residual")
    ax.set_ylabel("differential residual")
    ax.set_title(f"{table.suite}: {table.agreed}/{len(table.rows)} agree")
    ax.legend()
    _save(fig, path)
