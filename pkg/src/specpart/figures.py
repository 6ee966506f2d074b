"""Report figures rendered from the delimited outputs (Agg backend, to files)."""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_SAVE = {"dpi": 110, "metadata": {"Software": None}}


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _save(fig, path):
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def render_figures(outdir: str) -> list:
    made = []
    part_csv = os.path.join(outdir, "partition.csv")
    weyl_json = os.path.join(outdir, "weyl.json")
    dens_csv = os.path.join(outdir, "density.csv")
    shell_csv = os.path.join(outdir, "shell_diagnostics.csv")
    evolve_json = os.path.join(outdir, "evolve.json")

    if os.path.exists(part_csv):
        _, rows = _read_csv(part_csv)
        k = np.array([float(r[0]) for r in rows])
        lam = np.array([float(r[1]) for r in rows])
        res = np.array([float(r[5]) for r in rows])
        if len(k) > 1:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.loglog(lam, k, drawstyle="steps-post", lw=1.0, label="N+(lambda)")
            if os.path.exists(weyl_json):
                with open(weyl_json) as fh:
                    w = json.load(fh)
                ax.loglog(lam, w["b_total"] * lam ** (2.0 / w["s"]), "--",
                          label="b lambda^(d/s)")
            ax.set_xlabel("lambda")
            ax.set_ylabel("count")
            ax.legend()
            ax.set_title("counting function vs predicted power law")
            fig.tight_layout()
            made.append(_save(fig, os.path.join(outdir, "fig_staircase.png")))

            fig, ax = plt.subplots(figsize=(6, 4))
            pos = res > 0
            ax.loglog(k[pos], res[pos], ".", ms=3)
            ax.set_xlabel("k")
            ax.set_ylabel("|lambda_k - mu_{k+r}|")
            ax.set_title("series-matching residuals")
            fig.tight_layout()
            made.append(_save(fig, os.path.join(outdir, "fig_residuals.png")))

    if os.path.exists(dens_csv):
        _, rows = _read_csv(dens_csv)
        lam = np.array([float(r[0]) for r in rows])
        dens = np.array([float(r[1]) for r in rows])
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(lam, dens, lw=1.0, label="mollified density")
        if os.path.exists(weyl_json):
            with open(weyl_json) as fh:
                w = json.load(fh)
            if w["s"] == 1.0:
                ax.plot(lam, w["a1_integral_total"] * lam, "--", label="a_{d-1} lambda")
        ax.set_xlabel("lambda")
        ax.set_ylabel("density")
        ax.legend()
        ax.set_title("mollified spectral density")
        fig.tight_layout()
        made.append(_save(fig, os.path.join(outdir, "fig_density.png")))

    if os.path.exists(shell_csv):
        _, rows = _read_csv(shell_csv)
        series = {}
        for j, rho, kind, v in rows:
            series.setdefault((j, kind), []).append((float(rho), float(v)))
        fig, ax = plt.subplots(figsize=(6, 4))
        for (j, kind), pts in sorted(series.items()):
            pts = sorted(pts)
            style = "o-" if kind == "commutator" else "s--"
            ax.loglog([p[0] for p in pts], [max(p[1], 1e-18) for p in pts],
                      style, ms=4, label=f"{kind} {j}")
        ax.set_xlabel("shell radius")
        ax.set_ylabel("norm")
        ax.legend(fontsize=7)
        ax.set_title("propagator/projection commutation on shells")
        fig.tight_layout()
        made.append(_save(fig, os.path.join(outdir, "fig_shells.png")))

    if os.path.exists(evolve_json):
        with open(evolve_json) as fh:
            ev = json.load(fh)
        fig, ax = plt.subplots(figsize=(6, 4))
        for j, tr in sorted(ev.get("packet", {}).items()):
            c = np.array(tr["centers"])
            f = np.array(tr["flow_centers"])
            ax.plot(c[:, 0], c[:, 1], "o", ms=5, label=f"packet {j}")
            ax.plot(f[:, 0], f[:, 1], "x", ms=7, label=f"flow {j}")
        ax.set_xlim(0, 2 * np.pi)
        ax.set_ylim(0, 2 * np.pi)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.legend(fontsize=7)
        ax.set_title("wave-packet centers vs Hamiltonian flow")
        fig.tight_layout()
        made.append(_save(fig, os.path.join(outdir, "fig_packets.png")))

    return made
