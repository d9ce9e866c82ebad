"""Figure rendering for the CLI report paths.

Every report command writes its delimited data first; these helpers render a
companion PNG next to it.  Headless backend so batch runs never need a display.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def mf_ratio_figure(rows: list[dict], path) -> None:
    """Ratio vs n with jackknife errors and the analytic lower bound when valid."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ok = [r for r in rows if r["status"] == "ok"]
    if ok:
        ax.errorbar(
            [r["n"] for r in ok], [r["ratio"] for r in ok],
            yerr=[r["ratio_err"] for r in ok],
            fmt="o-", capsize=3, label="ratio estimate",
        )
    bound = [(r["n"], r["analytic_bound"]) for r in rows
             if not math.isnan(r["analytic_bound"])]
    if bound:
        ax.plot(*zip(*bound), "s--", color="crimson", label="analytic lower bound")
    ax.axhline(1.0, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("n")
    ax.set_ylabel("Marcu-Fredenhagen ratio")
    if ok or bound:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def wilson_scan_figure(per_j: dict[int, dict], path) -> None:
    """-log W against perimeter and area, one panel pair per charge."""
    n = len(per_j)
    fig, axes = plt.subplots(n, 2, figsize=(8, 3.1 * n), squeeze=False)
    for row, (j, data) in enumerate(sorted(per_j.items())):
        loops, ests, fit = data["loops"], data["estimates"], data.get("fit")
        usable = [(p, a, e) for (p, a), e in zip(loops, ests) if e.mean > 3 * e.stderr]
        for col, which in enumerate(("perimeter", "area")):
            ax = axes[row][col]
            xs = [p if which == "perimeter" else a for p, a, _ in usable]
            ys = [-math.log(e.mean) for _, _, e in usable]
            yerr = [e.stderr / e.mean for _, _, e in usable]
            ax.errorbar(xs, ys, yerr=yerr, fmt="o", capsize=3)
            ax.set_xlabel(which)
            ax.set_ylabel(r"$-\log \hat W$")
            title = f"j = {j}"
            if fit is not None:
                title += (
                    f"  ($c_P$={fit.perimeter_coefficient:.2f}, "
                    f"$c_A$={fit.area_coefficient:.2f})"
                )
            ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def phase_scan_figure(report, path) -> None:
    """Level sets of g1 and of the confinement smallness a over the coupling grid."""
    betas, kappas = report.betas, report.kappas
    g1 = np.array([r[2] for r in report.rows]).reshape(len(betas), len(kappas))
    a = np.array([r[3] for r in report.rows]).reshape(len(betas), len(kappas))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, grid, label in ((axes[0], g1, "$g_1$"), (axes[1], a, "confinement $a$")):
        if len(betas) < 2 or len(kappas) < 2:
            ax.plot(betas, grid[:, 0], "o-")
            ax.set_xlabel(r"$\beta$")
            ax.set_ylabel(label)
            continue
        cf = ax.contourf(betas, kappas, np.log10(grid.T + 1e-300), levels=18, cmap="viridis")
        ax.contour(betas, kappas, grid.T, levels=[1.0], colors="white", linewidths=1.4)
        fig.colorbar(cf, ax=ax, label=f"log10 {label}")
        ax.set_xlabel(r"$\beta$")
        ax.set_ylabel(r"$\kappa$")
        ax.set_title(f"{label} (white: level 1)", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def polymer_figure(rows: list[dict], path) -> None:
    """|phi| against its Hoelder bound; everything must sit on or below y = x."""
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    for kind, marker in (("charge-1", "o"), ("charge-k", "^")):
        pts = [(r["holder_bound"], abs(r["phi"])) for r in rows if r["kind"] == kind]
        if pts:
            ax.scatter(*zip(*pts), s=18, marker=marker, label=kind, alpha=0.75)
    lim = max((max(abs(r["phi"]), r["holder_bound"]) for r in rows), default=1.0)
    ax.plot([0, lim], [0, lim], "k--", lw=0.8, label="bound = |phi|")
    ax.set_xlabel("Hoelder bound")
    ax.set_ylabel(r"$|\phi|$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
