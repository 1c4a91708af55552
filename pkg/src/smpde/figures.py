"""Figure rendering for the CLI report paths.

Every command writes a PNG next to its delimited output.  Rendering is
headless (Agg) and deterministic for fixed inputs, so figures participate in
the hashed manifest like any other artifact.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_solve",
    "render_average",
    "render_regularity",
    "render_besov",
    "render_sample",
    "render_kernel_table",
]

_DPI = 130


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_solve(grid, solution_values, slice_indices, distances, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    x = grid.x_centers()
    for idx in slice_indices:
        ax1.plot(x, solution_values[idx], label=f"t={idx * grid.dt:g}")
    ax1.set_xlabel("x")
    ax1.set_ylabel("u(t, x)")
    ax1.legend(fontsize=8)
    ax1.set_title("solution slices")
    if distances:
        ax2.semilogy(np.arange(1, len(distances) + 1), distances, "o-")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("successive distance")
    ax2.set_title("fixed-point trace")
    ax2.grid(True, alpha=0.3)
    return _save(fig, path)


def render_average(eps, distances, xi_sups, fitted_rate, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(eps, distances, "o-", label="sup_t L2 distance")
    ax.loglog(eps, xi_sups, "s--", label="noise-term gap")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("gap")
    ax.set_title(f"averaging convergence (fitted rate {fitted_rate:.3f})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def render_regularity(grid, l2_trace, theta_slice, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(grid.t_levels(), l2_trace)
    ax1.set_xlabel("t")
    ax1.set_ylabel("L2 norm of noise term")
    ax1.set_title("L2 trace")
    ax1.grid(True, alpha=0.3)
    ax2.plot(grid.x_centers(), theta_slice)
    ax2.set_xlabel("x")
    ax2.set_ylabel("theta(T, x)")
    ax2.set_title("final noise slice")
    ax2.grid(True, alpha=0.3)
    return _save(fig, path)


def render_besov(rows, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    idx = np.arange(len(rows))
    lhs = [r["lhs"] for r in rows]
    rhs = [r["rhs"] for r in rows]
    ax.plot(idx, lhs, "o", ms=3, label="|integral|")
    ax.plot(idx, rhs, ".", ms=3, label="bound")
    ax.set_yscale("log")
    ax.set_xlabel("pair")
    ax.set_ylabel("value")
    ax.set_title("dyadic estimate: left side vs bound")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def render_sample(grid, increments, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    x = grid.x_centers()
    ax1.plot(x, increments, lw=0.6)
    ax1.set_xlabel("x")
    ax1.set_ylabel("cell increment")
    ax1.set_title("measure increments")
    ax2.plot(x, np.cumsum(increments), lw=0.9)
    ax2.set_xlabel("x")
    ax2.set_ylabel("cumulative mass")
    ax2.set_title("running integral")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    return _save(fig, path)


def render_kernel_table(x, times, p_rows, px_rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    for t, row in zip(times, p_rows):
        ax1.plot(x, row, label=f"t={t:g}")
    for t, row in zip(times, px_rows):
        ax2.plot(x, row, label=f"t={t:g}")
    ax1.set_title("heat kernel")
    ax2.set_title("kernel x-derivative")
    for ax in (ax1, ax2):
        ax.set_xlabel("x")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
    return _save(fig, path)
