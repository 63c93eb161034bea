"""Matplotlib rendering for the report paths.

Each CLI report writes a PNG next to its CSV.  Rendering is optional
everywhere (--no-figures) and kept deliberately plain: log axes where the
quantity is a power law, a grid, and direct labels.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .exact import BiasProfile
from .game import GameTrace

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


def _new_axes():
    plt.rcParams.update(STYLE)
    fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_profile(profile: BiasProfile, path, title: str = "") -> None:
    fig, ax = _new_axes()
    p = profile.grid.points
    ax.plot(p, profile.weighted_bias, lw=1.0, label="weighted bias")
    ax.set_xlabel("p")
    ax.set_ylabel("p E[R] - beta p log p")
    ax2 = ax.twinx()
    ax2.plot(p, profile.second_moment, lw=1.0, color="tab:red", label="second moment")
    ax2.set_ylabel("S(c, p)")
    ax.set_title(title or f"sup bias {profile.sup_bias:.3e}")
    handles, labels = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(handles + h2, labels + l2, loc="lower right")
    _save(fig, path)


def render_scaling(rows: list[dict], path) -> None:
    fig, ax = _new_axes()
    K = [r["K"] for r in rows]
    ax.loglog(K, [r["epsilon"] for r in rows], "o-", label="minimax optimum")
    if rows and "epsilon_table" in rows[0]:
        ax.loglog(K, [r["epsilon_table"] for r in rows], "s--", label="table")
    ref = rows[0]["epsilon"] * (np.asarray(K, dtype=float) / K[0]) ** -2.0
    ax.loglog(K, ref, ":", color="gray", label="1/K^2")
    ax.set_xlabel("group size K")
    ax.set_ylabel("worst-case weighted bias")
    ax.legend()
    _save(fig, path)


def render_pareto(rows: list[dict], path) -> None:
    fig, ax = _new_axes()
    ax.loglog([r["epsilon"] for r in rows], [r["v"] for r in rows], "o-")
    ax.set_xlabel("bias budget")
    ax.set_ylabel("worst-case second moment")
    ax.set_title("bias-variance frontier")
    _save(fig, path)


def render_split(rows: list[dict], path) -> None:
    fig, ax = _new_axes()
    p = [r["p"] for r in rows]
    ax.plot(p, [r["var_split"] / r["var_full"] for r in rows], "o-", label="variance ratio")
    ax.plot(p, [r["bias_split"] / r["bias_full"] for r in rows], "s--", label="bias ratio")
    ax.axhline(1.0, color="gray", lw=0.8)
    ax.axhline(4.0, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("p")
    ax.set_ylabel("split / full")
    ax.legend()
    _save(fig, path)


def render_taylor(rows: list[dict], path) -> None:
    fig, ax = _new_axes()
    K = [r["K"] for r in rows]
    ax.semilogx(K, [r["sup_bias_times_K"] for r in rows], "o-", label="sup bias x K")
    ax.semilogx(
        K,
        [r["pointwise_bias_half_times_K2"] for r in rows],
        "s--",
        label="bias(1/2) x K^2",
    )
    ax.set_xlabel("group size K")
    ax.legend()
    _save(fig, path)


def render_trace(trace: GameTrace, path) -> None:
    fig, ax = _new_axes()
    t = np.arange(len(trace))
    gap = np.asarray(trace.gap)
    l1 = np.asarray(trace.l1_error)
    pos = gap > 0
    ax.semilogy(t[pos], gap[pos], lw=0.8, label="duality gap")
    pos = l1 > 0
    ax.semilogy(t[pos], l1[pos], lw=0.8, label="l1 to reference")
    ax.set_xlabel("iteration record")
    ax.legend()
    _save(fig, path)
