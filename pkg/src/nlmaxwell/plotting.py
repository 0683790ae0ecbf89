"""Figures written next to a run report: energy/residual history and mid-plane slices."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field_core import VectorField  # noqa: E402
from .solver import SolverReport  # noqa: E402

TRACE_FIGURE = "energy_trace.png"
SLICE_FIGURE = "slices.png"


def plot_trace(rep: SolverReport, path) -> Path:
    """Reduced energy above its final value and the dual residual, per iteration."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    e = np.asarray(rep.energy_trace)
    gap = e - e[-1]
    it = np.arange(len(e))
    pos = gap > 0
    if pos.any():
        ax1.semilogy(it[pos], gap[pos], lw=1.2)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel(r"$\tilde J(P_k) - \tilde J(P_{\mathrm{final}})$")
    ax1.set_title(f"c = {rep.c_level:.10g}")
    r = np.asarray(rep.residual_trace)
    ax2.semilogy(np.arange(len(r)), r, lw=1.2, color="C1")
    tol = rep.extra.get("tol")
    if tol:
        ax2.axhline(tol, ls="--", lw=0.8, color="0.4")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("relative dual residual")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_slices(P: VectorField, E: VectorField, path) -> Path:
    """``|P|`` and ``|E|`` on the plane ``z = 0`` through the box center."""
    g = P.grid
    k = g.n // 2
    ext = (g.coords[0], g.coords[-1], g.coords[0], g.coords[-1])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.4), constrained_layout=True)
    for ax, f, name in zip(axes, (P, E), ("|P|", "|E|")):
        # transpose so that x runs horizontally
        im = ax.imshow(f.magnitude()[:, :, k].T, origin="lower", extent=ext, cmap="viridis")
        ax.set_title(f"{name} at z = 0")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def write_figures(rep: SolverReport, P: VectorField, E: VectorField, out_dir) -> list[Path]:
    out = Path(out_dir)
    return [plot_trace(rep, out / TRACE_FIGURE), plot_slices(P, E, out / SLICE_FIGURE)]
