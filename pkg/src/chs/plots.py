"""Matplotlib figures written next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def rate_figure(points, slope, logc, path):
    """Log-log scatter of total error vs sqrt(alpha)+sqrt(beta) with the fit line.

    points: iterable of (sqrt_sum, total, excluded_flag).
    """
    pts = list(points)
    fig, ax = plt.subplots(figsize=(6, 5))
    used = [(x, y) for x, y, excl in pts if not excl]
    excl = [(x, y) for x, y, e in pts if e]
    if used:
        xs, ys = zip(*used)
        ax.loglog(xs, ys, "ko", ms=7, label="sweep points")
    if excl:
        xs, ys = zip(*excl)
        ax.loglog(xs, ys, "kx", ms=7, label="excluded (near error floor)")
    if used and slope is not None:
        xs = np.array(sorted(x for x, _ in used))
        ax.loglog(xs, np.exp(logc) * xs**slope, "k--",
                  label=f"fit: slope {slope:.2f}")
    ax.set_xlabel(r"$\alpha^{1/2} + \beta^{1/2}$")
    ax.set_ylabel("total error")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend(loc="best")
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)


def trajectory_figure(times, energies, masses, path):
    """Energy decay and mass drift over one integration."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(times, energies, "k-")
    ax1.set_ylabel("energy")
    ax1.grid(True, alpha=0.4)
    drift = np.asarray(masses) - masses[0]
    ax2.plot(times, drift, "k-")
    ax2.set_ylabel("mass drift")
    ax2.set_xlabel("t")
    ax2.grid(True, alpha=0.4)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
