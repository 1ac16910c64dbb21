"""Figure rendering for run, eigen, and check outputs.

Figures are written next to the delimited files; the Agg backend keeps the
renderer headless.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_run_figures(out_dir: str) -> list[str]:
    """Energy history, Picard trace, and boundary curves from the run CSVs."""
    written: list[str] = []

    energy_path = os.path.join(out_dir, "energy.csv")
    if os.path.exists(energy_path):
        data = np.genfromtxt(energy_path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        ax1.plot(data["t"], data["E_total"], "o-", label="total")
        ax1.plot(data["t"], data["E_en"], "s--", label="tangential")
        ax1.plot(data["t"], data["E_el"], "^--", label="normal")
        ax1.set_xlabel("t")
        ax1.set_ylabel("energy")
        ax1.legend(fontsize=8)
        ax2.plot(data["t"], data["J_min"], "v-", label="J min")
        ax2.plot(data["t"], data["J_max"], "^-", label="J max")
        ax2.axhline(0.9, color="k", ls=":", lw=0.8)
        ax2.axhline(1.1, color="k", ls=":", lw=0.8)
        ax2.set_xlabel("t")
        ax2.set_ylabel("Jacobian bounds")
        ax2.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, "energy.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    picard_path = os.path.join(out_dir, "picard.csv")
    if os.path.exists(picard_path):
        data = np.genfromtxt(picard_path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        if data.size:
            fig, ax = plt.subplots(figsize=(4.6, 3.2))
            ax.semilogy(data["iter"], np.maximum(data["d_n"], 1e-300), "o-", label="sup distance")
            ax.semilogy(data["iter"], np.maximum(data["e_n"], 1e-300), "s--", label="dissipation distance")
            ax.set_xlabel("iteration")
            ax.set_ylabel("iterate distance")
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = os.path.join(out_dir, "picard.png")
            fig.savefig(path, dpi=130)
            plt.close(fig)
            written.append(path)

    boundary_files = sorted(
        f for f in os.listdir(out_dir) if f.startswith("boundary_") and f.endswith(".csv")
    )
    if boundary_files:
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        for f in boundary_files:
            data = np.genfromtxt(os.path.join(out_dir, f), delimiter=",", names=True)
            for comp in (0.0, 1.0):
                sel = data["component"] == comp
                ax.plot(data["y1"][sel], data["y2"][sel], lw=1.0)
        ax.set_xlabel("y1")
        ax.set_ylabel("y2")
        ax.set_title("free boundary")
        fig.tight_layout()
        path = os.path.join(out_dir, "boundary.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written


def render_eigen_figures(out_dir: str) -> list[str]:
    path_csv = os.path.join(out_dir, "eigenvalues.csv")
    if not os.path.exists(path_csv):
        return []
    data = np.genfromtxt(path_csv, delimiter=",", names=True)
    data = np.atleast_1d(data)
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.plot(data["index"], data["sigma"], "o-")
    ax.set_xlabel("mode index")
    ax.set_ylabel("eigenvalue")
    fig.tight_layout()
    path = os.path.join(out_dir, "eigenvalues.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def render_check_figures(out_dir: str) -> list[str]:
    path_csv = os.path.join(out_dir, "inequalities.csv")
    if not os.path.exists(path_csv):
        return []
    constants: dict[str, list[float]] = {}
    with open(path_csv) as f:
        next(f)
        for line in f:
            parts = line.strip().split(",")
            if len(parts) < 4:
                continue
            constants.setdefault(parts[0], []).append(float(parts[3]))
    if not constants:
        return []
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.boxplot(list(constants.values()), tick_labels=list(constants.keys()))
    ax.set_ylabel("fitted constant")
    fig.tight_layout()
    path = os.path.join(out_dir, "inequalities.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]
