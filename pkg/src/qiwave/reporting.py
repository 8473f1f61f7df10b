"""CSV emission and figure rendering for experiment results.

CSV is the primary output: comma-separated, '.' decimal, 17 significant
digits, header row, UNIX newlines.  Identical configurations must
produce bitwise-identical files except for the trailing wall-time
column, so nothing time- or machine-dependent goes into any other
column.  Each CSV gets a companion PNG rendering of the standard
convergence or energy plot next to it.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CONVERGENCE_HEADER = [
    "method",
    "h",
    "k",
    "err_v_sup",
    "err_phi_sup",
    "err_v_l2t",
    "err_phi_l2t",
    "order",
    "wall_s",
]

ENERGY_HEADER = ["method", "h", "k", "t", "energy", "rel_energy_err"]

PROJECT_HEADER = ["h", "err_pi1", "err_pi2", "order_pi1", "order_pi2"]


def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def figure_path(csv_path: str) -> str:
    stem, _ = os.path.splitext(csv_path)
    return stem + ".png"


def plot_convergence(csv_path: str, rows: list[tuple], title: str) -> str:
    """Log-log error-vs-h plot with slope guides, saved next to the CSV."""
    methods = sorted({r[0] for r in rows})
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for ax, (col, label) in zip(
        axes, [(3, r"sup-in-time $L^2$ error"), (5, r"$L^2$-in-time error")]
    ):
        h = ev = None
        for m in methods:
            sel = sorted((r for r in rows if r[0] == m), key=lambda r: r[1])
            h = np.array([r[1] for r in sel])
            ev = np.array([r[col] for r in sel])
            ep = np.array([r[col + 1] for r in sel])
            ax.loglog(h, ev, "o-", label=f"{m}: v")
            ax.loglog(h, ep, "s--", label=f"{m}: phi")
        if h is not None and len(h) > 1:
            for slope in (2, 3):
                guide = ev[-1] * (h / h[-1]) ** slope
                ax.loglog(h, guide, ":", color="gray", linewidth=0.8)
                ax.annotate(f"h^{slope}", (h[0], guide[0]), fontsize=8, color="gray")
        ax.set_xlabel("h")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    out = figure_path(csv_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_energy(csv_path: str, rows: list[tuple], title: str) -> str:
    """Semi-log relative energy drift over time, one curve per time step."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for k in sorted({r[2] for r in rows}, reverse=True):
        sel = [r for r in rows if r[2] == k]
        t = np.array([r[3] for r in sel])
        rel = np.array([max(r[5], 1e-18) for r in sel])
        ax.semilogy(t, rel, label=f"k = {k:g}")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$|E_0 - E_{t_n}| / |E_0|$")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.suptitle(title)
    fig.tight_layout()
    out = figure_path(csv_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_projection(csv_path: str, rows: list[tuple], title: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    h = np.array([r[0] for r in rows])
    ax.loglog(h, [r[1] for r in rows], "o-", label=r"$\Pi^1$ error")
    ax.loglog(h, [r[2] for r in rows], "s--", label=r"$\Pi^2$ error")
    ax.set_xlabel("h")
    ax.set_ylabel(r"$L^2$ projection error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.suptitle(title)
    fig.tight_layout()
    out = figure_path(csv_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
