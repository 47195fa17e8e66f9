"""Figure rendering for report data; PNG files alongside the CSVs.

Charts mirror the standard presentation: best signed NLL deltas per budget
split (negative bars mean the sweep beat the baseline optimum), threshold
fraction curves over t with the similar/equal levels marked, AUC versus
stochastic share with baseline levels as horizontal lines, and the
epsilon-ball probabilities on a log-eps axis.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_deltas(data, path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    if data.deltas:
        js = np.array([j for j, _, _ in data.deltas], dtype=float)
        vals = np.array([v for _, _, v in data.deltas])
        colors = np.where(vals <= 0, "tab:blue", "tab:red")
        ax.bar(np.arange(len(js)), vals, color=colors)
        ax.set_xticks(np.arange(len(js)))
        ax.set_xticklabels([f"({j},{k})" for j, k, _ in data.deltas], rotation=45, ha="right")
        ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("(stochastic, deterministic) budget split")
    ax.set_ylabel("min signed relative NLL difference")
    ax.set_title("Best NLL delta vs baseline optimum (negative = better)")
    return _save(fig, path)


def render_psi(data, path: str) -> str:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    sweep_cols = [c for c in data.psi if data.sweep_label and c.startswith(f"psi_{data.sweep_label}_j")]
    baseline_cols = [c for c in data.psi if c not in sweep_cols]
    cmap = plt.get_cmap("viridis")
    for i, col in enumerate(sweep_cols):
        color = cmap(i / max(len(sweep_cols) - 1, 1))
        ax.plot(data.t_grid, data.psi[col], color=color, lw=1.0, alpha=0.8)
    for col, style in zip(baseline_cols, ("^-", "o-", "s-")):
        ax.plot(data.t_grid, data.psi[col], style, ms=3, lw=1.5, label=col.removeprefix("psi_"))
    for level, ls in ((0.85, "-."), (0.95, ":")):
        ax.axvline(level, color="gray" if ls == "-." else "black", ls=ls, lw=1.0)
    if sweep_cols:
        sm = plt.cm.ScalarMappable(cmap=cmap)
        sm.set_array(np.array([j for j, _ in data.pairs] or [0]))
        fig.colorbar(sm, ax=ax, label="stochastic budget j")
    ax.set_xlabel("score threshold t")
    ax.set_ylabel("fraction of solves at or above t")
    ax.set_xlim(min(data.t_grid), 1.0)
    if baseline_cols:
        ax.legend(loc="lower left", fontsize=8)
    return _save(fig, path)


def render_auc(data, path: str) -> str:
    taus = sorted({row["tau"] for row in data.auc})
    fig, axes = plt.subplots(1, max(len(taus), 1), figsize=(5.5 * max(len(taus), 1), 4), squeeze=False)
    for ax, tau in zip(axes[0], taus):
        rows = [r for r in data.auc if r["tau"] == tau]
        sweep = [(r["j"], r["auc_norm"]) for r in rows if r["j"] != ""]
        if sweep:
            js, vals = zip(*sorted(sweep))
            ax.plot(js, vals, "o-", color="tab:purple", label=data.sweep_label)
        for r, color in zip((r for r in rows if r["j"] == ""), ("tab:green", "tab:blue", "tab:orange")):
            ax.axhline(r["auc_norm"], color=color, ls="--", lw=1.2, label=r["set"])
        ax.set_title(f"normalized AUC, tau = {tau}")
        ax.set_xlabel("stochastic budget j")
        ax.set_ylabel("AUC / (1 - tau)")
        ax.set_ylim(-0.02, 1.05)
        ax.legend(fontsize=8)
    return _save(fig, path)


def render_epsball(data, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    if data.epsball:
        eps = [row["eps"] for row in data.epsball]
        series = [c for c in data.epsball[0] if c.startswith("p_")]
        for col, style in zip(series, ("o-", "^-", "s-", "d-")):
            ax.plot(eps, [row[col] for row in data.epsball], style, label=col.removeprefix("p_"))
        ax.set_xscale("log")
        ax.invert_xaxis()
        ax.legend(fontsize=8)
    ax.set_xlabel("NLL ball radius")
    ax.set_ylabel("estimated probability within radius")
    ax.set_ylim(-0.05, 1.05)
    return _save(fig, path)


def render_all(data, out_dir) -> dict[str, str]:
    return {
        "deltas_fig": render_deltas(data, os.path.join(out_dir, "deltas.png")),
        "psi_fig": render_psi(data, os.path.join(out_dir, "psi.png")),
        "auc_fig": render_auc(data, os.path.join(out_dir, "auc.png")),
        "epsball_fig": render_epsball(data, os.path.join(out_dir, "epsball.png")),
    }
