"""Matplotlib rendering of the CSV reports, written next to the tables.

Every renderer takes a frame (or field array) and a PNG path; the CSV
stays the canonical output, the figure is a convenience view of it.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bins(df, path, xlabel):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for method, sub in df.groupby("method"):
        sub = sub[sub["count"] > 0]
        ax.plot(sub["bin_upper"], sub["mean_gain"], marker="o", ms=3, label=method)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("average beam gain")
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def render_cdf(df, path):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for method, sub in df.groupby("method"):
        ax.plot(sub["gain"], sub["cdf"], label=method)
    ax.set_xlabel("beam gain")
    ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def render_overhead(df, path):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for method, sub in df.groupby("method"):
        ax.semilogx(sub["n"], sub["mean_gain"], label=method)
    ax.set_xlabel("training overhead (beams tested)")
    ax.set_ylabel("average beam gain")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    _finish(fig, path)


def render_height_sweep(df, path):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for method, sub in df.groupby("method"):
        ax.plot(sub["height"], sub["mean_gain"], marker="s", ms=4, label=method)
    ax.set_xlabel("obstacle height (m)")
    ax.set_ylabel("average beam gain")
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def render_heatmap(df, path, method=None):
    sub = df if method is None else df[df["method"] == method]
    piv = sub.pivot_table(index="cy", columns="cx", values="mean_gain")
    fig, ax = plt.subplots(figsize=(6.5, 5))
    im = ax.pcolormesh(piv.columns, piv.index, piv.values, shading="nearest")
    fig.colorbar(im, ax=ax, label="average beam gain")
    ax.set_xlabel("obstacle center x (m)")
    ax.set_ylabel("obstacle center y (m)")
    _finish(fig, path)


def render_field(field, grid, path, config=None, db_floor=-60.0):
    """Log-magnitude map of a propagated field with obstacle outlines."""
    mag = np.abs(field).T
    peak = mag.max() or 1.0
    db = 20.0 * np.log10(np.maximum(mag / peak, 10 ** (db_floor / 20.0)))
    extent = [0.0, (grid.n_cols - 1) * grid.dx,
              grid.y0, grid.y0 + (grid.n_rows - 1) * grid.dy]
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    im = ax.imshow(db, origin="lower", extent=extent, aspect="auto", cmap="inferno",
                   vmin=db_floor, vmax=0.0)
    fig.colorbar(im, ax=ax, label="|E| (dB rel. peak)")
    if config is not None:
        for ob in config.obstacles:
            x1, x2 = ob.x_range
            y1, y2 = ob.y_range
            ax.add_patch(plt.Rectangle((x1, y1), x2 - x1, y2 - y1,
                                       fill=False, edgecolor="w", lw=1.2))
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    _finish(fig, path)


def render_caustic(points, path, paraxial=None, receiver=None):
    """Caustic point cloud with optional paraxial overlay and receiver marker."""
    xs = [p.x_c for p in points if p.valid]
    ys = [p.y_c for p in points if p.valid]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(xs, ys, ".", ms=2, label="caustic")
    if paraxial is not None:
        ax.plot(paraxial[0], paraxial[1], "-", lw=1, label="paraxial")
    if receiver is not None:
        ax.plot(*receiver, "r*", ms=10, label="receiver")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)


def render_pattern(pattern, path):
    mag = np.abs(pattern.values)
    peak = mag.max() or 1.0
    n = len(mag)
    sin_theta = -1.0 + np.arange(n) * 2.0 / (n - 1)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(sin_theta, mag / peak)
    ax.set_xlabel(r"spatial angle $\sin\theta$")
    ax.set_ylabel("normalized received signal strength")
    ax.grid(alpha=0.3)
    _finish(fig, path)
