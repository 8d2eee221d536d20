"""Figure rendering for scan grids, boundary curves, and polygons.

Everything here consumes the same data that goes to CSV, so plots can be
regenerated from saved runs.  The Agg backend keeps rendering headless;
files are written next to the delimited output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .scan import (
    LABEL_DIVERGED,
    LABEL_FIXED_L,
    LABEL_FIXED_R,
    LABEL_NONE,
    BoundaryCurve,
    TongueGrid,
    WidthProfile,
)
from .shrink import Polygon, Unfolding


def plot_grid(grid: TongueGrid, path: str, title: str = "") -> str:
    """Color cells by detected period; fixed points and misses stay muted."""
    h, w = grid.shape
    value = np.zeros(grid.label.size)
    for c in range(grid.label.size):
        label = grid.label[c]
        if label in (LABEL_FIXED_L, LABEL_FIXED_R):
            value[c] = 1.0
        elif label == LABEL_DIVERGED:
            value[c] = np.nan
        elif label == LABEL_NONE:
            value[c] = 0.0
        else:
            value[c] = grid.n[c]
    img = value.reshape(h, w)
    fig, ax = plt.subplots(figsize=(7.2, 5.4))
    extent = (grid.p1[0], grid.p1[-1], grid.p2[0], grid.p2[-1])
    shown = ax.imshow(img, origin="lower", extent=extent, aspect="auto",
                      cmap="turbo", interpolation="nearest")
    fig.colorbar(shown, ax=ax, label="detected period (1 = fixed point)")
    ax.set_xlabel("p1")
    ax.set_ylabel("p2")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_curves(curves, path: str, title: str = "") -> str:
    """Boundary curves in parameter space; accepts a dict or an iterable."""
    if isinstance(curves, dict):
        curves = list(curves.values())
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    for curve in curves:
        pts = curve.points
        ax.plot(pts[:, 0], pts[:, 1], lw=1.2, label=f"index {curve.index}")
    ax.set_xlabel("p1")
    ax.set_ylabel("p2")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_width(profile: WidthProfile, path: str, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(profile.arclength, profile.width, lw=1.2)
    for i in profile.minima:
        ax.plot(profile.arclength[i], profile.width[i], "rv", ms=6)
    ax.set_xlabel("arclength along boundary")
    ax.set_ylabel("tongue width")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_polygon(poly: Polygon, path: str, title: str = "") -> str:
    """Vertices plus sampled interpolating cycles; 3D when the space allows."""
    verts = poly.vertices
    closed = np.vstack([verts, verts[:1]])
    if verts.shape[1] >= 3:
        fig = plt.figure(figsize=(6.4, 5.6))
        ax = fig.add_subplot(projection="3d")
        for cyc in poly.sampled_cycles[:: max(1, len(poly.sampled_cycles) // 16)]:
            ax.plot(cyc.points[:, 0], cyc.points[:, 1], cyc.points[:, 2],
                    color="0.75", lw=0.4)
        ax.plot(closed[:, 0], closed[:, 1], closed[:, 2], "o-", color="C0", ms=4)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_zlabel("x3")
    else:
        fig, ax = plt.subplots(figsize=(6.0, 5.6))
        for cyc in poly.sampled_cycles[:: max(1, len(poly.sampled_cycles) // 16)]:
            ax.plot(cyc.points[:, 0], cyc.points[:, 1], color="0.75", lw=0.4)
        ax.plot(closed[:, 0], closed[:, 1], "o-", color="C0", ms=4)
        ax.axvline(0.0, color="0.4", lw=0.8, ls="--")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_unfolding(unfolding: Unfolding, path: str, title: str = "") -> str:
    """The four boundary curves in the local chart around the point."""
    fig, ax = plt.subplots(figsize=(6.0, 5.6))
    styles = {"s_check_0": ("C0", "-"), "s_check_ld": ("C1", "-"),
              "s_hat_0": ("C2", "--"), "s_hat_ld": ("C3", "--")}
    for name, rows in unfolding.boundary_samples.items():
        color, ls = styles.get(name, ("k", ":"))
        ax.plot(rows[:, 0], rows[:, 1], ls, color=color, lw=1.2, label=name)
    for probe in unfolding.region_probes:
        ax.plot(probe.eta, probe.nu, "k*", ms=9)
        ax.annotate(probe.region, (probe.eta, probe.nu),
                    textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.axhline(0.0, color="0.85", lw=0.6)
    ax.axvline(0.0, color="0.85", lw=0.6)
    ax.set_xlabel("eta")
    ax.set_ylabel("nu")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
