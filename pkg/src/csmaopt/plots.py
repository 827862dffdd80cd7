"""Figure rendering for the CLI report paths.

Each report command writes its delimited output and, next to it, a PNG of
the same data.  Figures are rendered through the Agg backend with pinned
style parameters so that repeated runs of a seeded command produce
byte-identical files.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _save(fig, path: str) -> None:
    fig.savefig(path, format="png")
    plt.close(fig)


def render_tau_table(rows: Sequence[dict], path: str) -> None:
    """Access probability vs density, one curve per (threshold, control SIR)."""
    combos = sorted({(r["is_dbm"], r["beta_c_db"]) for r in rows})
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for marker, (is_dbm, bc_db) in zip("osd^vP*X", combos):
            sel = [r for r in rows if (r["is_dbm"], r["beta_c_db"]) == (is_dbm, bc_db)]
            sel.sort(key=lambda r: r["lambda"])
            lam = [r["lambda"] for r in sel]
            label = f"$I_s$={is_dbm:g} dBm, $\\beta_c$={bc_db:g} dB"
            line, = ax.plot(lam, [r["tau_analytic"] for r in sel], marker=marker,
                            label=label + " (analytic)")
            if any(r["tau_sim"] is not None for r in sel):
                ax.errorbar(
                    lam,
                    [r["tau_sim"] for r in sel],
                    yerr=[r["tau_sim_ci95"] or 0.0 for r in sel],
                    fmt=marker, mfc="none", linestyle="none",
                    color=line.get_color(), label=label + " (sim)",
                )
        ax.set_xscale("log")
        ax.set_xlabel("node density $\\lambda$ (nodes/m$^2$)")
        ax.set_ylabel("medium access probability $\\tau$")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)


def render_ase_sweep(rows: Sequence[dict], path: str) -> None:
    """ASE against the carrier-sense threshold, analytic curve plus any
    simulated points."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        x = [r["is_dbm"] for r in rows]
        ax.plot(x, [r["eta_analytic"] for r in rows], label="analytic")
        if any("eta_sim" in r and r["eta_sim"] is not None for r in rows):
            sim = [r for r in rows if r.get("eta_sim") is not None]
            ax.errorbar(
                [r["is_dbm"] for r in sim],
                [r["eta_sim"] for r in sim],
                yerr=[r["eta_sim_ci95"] for r in sim],
                fmt="o", mfc="none", linestyle="none", label="simulation",
            )
        ax.set_xlabel("carrier sensing threshold $I_s$ (dBm)")
        ax.set_ylabel("area spectral efficiency (bits/s/Hz/m$^2$)")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)


def render_optimize(entries: Sequence[dict], path: str) -> None:
    """Optimal threshold and maximum ASE against the target SIR, with the
    no-backoff comparison dashed."""
    beta = [e["beta_db"] for e in entries]
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.4), sharex=True)
        ax1.plot(beta, [e["is_star_dbm"] for e in entries], marker="o",
                 label="with backoff")
        ax1.plot(beta, [e["no_beb"]["is_dbm"] for e in entries], "--", marker="s",
                 mfc="none", label="backoff ignored")
        ax1.set_ylabel("optimal threshold $I_s^*$ (dBm)")
        ax1.legend()
        ax2.plot(beta, [e["eta_max"] for e in entries], marker="o",
                 label="maximum ASE")
        eta_nb = [e["no_beb"]["eta_at_threshold"] for e in entries]
        if all(v is not None for v in eta_nb):
            ax2.plot(beta, eta_nb, "--", marker="s", mfc="none",
                     label="ASE at no-backoff threshold")
        ax2.set_xlabel("target SIR $\\beta$ (dB)")
        ax2.set_ylabel("ASE (bits/s/Hz/m$^2$)")
        ax2.legend()
        fig.tight_layout()
        _save(fig, path)
