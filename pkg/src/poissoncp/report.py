"""Metric reports over result sets: CSV data files plus rendered figures.

The union of the provided sets (in the order given) defines the approximate
MLE used by the epsilon-ball table and the FMS analyses; the signed-NLL
deltas of a sweep set are measured against the union of the other
("baseline") sets only. CSV files are deterministic functions of the inputs;
figures are a convenience rendering of the same data.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySetError
from .metrics import (
    approx_mle,
    fms_auc,
    fms_fraction_curve,
    fms_values,
    prob_within_eps,
    signed_rel_diff,
)
from .records import ResultSet
from .tensor import SparseCountTensor

DEFAULT_EPS_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
DEFAULT_TAUS = (0.85, 0.95)


@dataclass
class ReportData:
    """Everything the CSV writers and figure renderers consume."""

    labels: list[str]
    sweep_label: str | None
    pairs: list[tuple[int, int]]
    mle_label: str
    mle_nll: float
    baseline_mle_nll: float
    deltas: list[tuple[int, int, float]]  # (j, k, min signed rel diff)
    epsball: list[dict]  # one row per eps
    t_grid: np.ndarray
    psi: dict[str, np.ndarray]  # column name -> curve over t_grid
    auc: list[dict]  # set/pair x tau rows
    files: dict[str, str] = field(default_factory=dict)


def _group_pairs(rset: ResultSet) -> dict[tuple[int, int], ResultSet]:
    groups: dict[tuple[int, int], ResultSet] = {}
    for rec in rset:
        key = (rec.j if rec.j is not None else -1, rec.k if rec.k is not None else -1)
        groups.setdefault(key, ResultSet(f"{rset.label}_j{key[0]}_k{key[1]}")).append(rec)
    return dict(sorted(groups.items()))


def compute_report(
    sets: list[tuple[str, ResultSet]],
    x: SparseCountTensor,
    eps_values=DEFAULT_EPS_GRID,
    t_grid=None,
    taus=DEFAULT_TAUS,
    sweep_label: str | None = None,
) -> ReportData:
    if not sets:
        raise EmptySetError("no result sets given")
    for _, rset in sets:
        rset.require_nonempty()
    labels = [label for label, _ in sets]
    if sweep_label is None:
        multi = [label for label, rset in sets if len({(r.j, r.k) for r in rset}) > 1]
        sweep_label = multi[0] if multi else None
    by_label = dict(sets)
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 101)
    t_grid = np.asarray(t_grid, dtype=np.float64)

    union = ResultSet("union")
    for _, rset in sets:
        union.extend(rset.records)
    mle_idx, mle_model = approx_mle(union, x)
    mle_nll = union[mle_idx].nll
    mle_label = labels[0]
    scan = 0
    for label, rset in sets:
        if scan <= mle_idx < scan + len(rset):
            mle_label = label
        scan += len(rset)

    baseline = ResultSet("baseline-union")
    for label, rset in sets:
        if label != sweep_label:
            baseline.extend(rset.records)
    if len(baseline) == 0:
        baseline = union
    baseline_idx, _ = approx_mle(baseline, x)
    baseline_nll = baseline[baseline_idx].nll

    groups = _group_pairs(by_label[sweep_label]) if sweep_label else {}
    pairs = [p for p in groups if p[0] >= 0]

    deltas = []
    for (j, k), grp in groups.items():
        best = min(signed_rel_diff(rec.nll, baseline_nll) for rec in grp)
        deltas.append((j, k, best))

    epsball = []
    for eps in eps_values:
        row: dict = {"eps": eps}
        for label, rset in sets:
            if label == sweep_label:
                continue
            row[f"p_{label}"] = prob_within_eps(mle_model, rset, x, eps)
        if sweep_label:
            per_pair = {pair: prob_within_eps(mle_model, grp, x, eps) for pair, grp in groups.items()}
            best = max(per_pair.values())
            winners = [pair for pair, p in per_pair.items() if p == best]
            row[f"p_{sweep_label}_best"] = best
            if len(winners) == len(per_pair):
                row["best_j"], row["best_k"] = "all", "all"
            else:
                row["best_j"], row["best_k"] = winners[0]
        epsball.append(row)

    psi: dict[str, np.ndarray] = {}
    scores_cache: dict[str, np.ndarray] = {}
    for label, rset in sets:
        if label == sweep_label:
            continue
        scores_cache[label] = fms_values(mle_model, rset)
        psi[f"psi_{label}"] = fms_fraction_curve(scores_cache[label], t_grid)
    for (j, k), grp in groups.items():
        scores = fms_values(mle_model, grp)
        scores_cache[f"{sweep_label}_j{j}_k{k}"] = scores
        psi[f"psi_{sweep_label}_j{j}_k{k}"] = fms_fraction_curve(scores, t_grid)

    auc = []
    for label, rset in sets:
        if label == sweep_label:
            continue
        for tau in taus:
            raw, norm = fms_auc(mle_model, rset, tau, scores=scores_cache[label])
            auc.append({"set": label, "j": "", "k": "", "tau": tau, "auc_raw": raw, "auc_norm": norm})
    for (j, k), grp in groups.items():
        scores = scores_cache[f"{sweep_label}_j{j}_k{k}"]
        for tau in taus:
            raw, norm = fms_auc(mle_model, grp, tau, scores=scores)
            auc.append({"set": sweep_label, "j": j, "k": k, "tau": tau, "auc_raw": raw, "auc_norm": norm})

    return ReportData(
        labels=labels,
        sweep_label=sweep_label,
        pairs=pairs,
        mle_label=mle_label,
        mle_nll=mle_nll,
        baseline_mle_nll=baseline_nll,
        deltas=deltas,
        epsball=epsball,
        t_grid=t_grid,
        psi=psi,
        auc=auc,
    )


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _num(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_report_files(data: ReportData, out_dir, render_figures: bool = True) -> dict[str, str]:
    """Write deltas/epsball/psi/auc CSVs (and figures) into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    path = os.path.join(out_dir, "deltas.csv")
    _write_csv(path, ["j", "k", "min_delta_r"], [[j, k, _num(v)] for j, k, v in data.deltas])
    paths["deltas"] = path

    if data.epsball:
        header = list(data.epsball[0].keys())
        rows = [[_num(row[c]) if isinstance(row[c], float) else row[c] for c in header] for row in data.epsball]
        path = os.path.join(out_dir, "epsball.csv")
        _write_csv(path, header, rows)
        paths["epsball"] = path

    psi_cols = list(data.psi.keys())
    rows = []
    for i, t in enumerate(data.t_grid):
        rows.append([_num(t)] + [_num(data.psi[c][i]) for c in psi_cols])
    path = os.path.join(out_dir, "psi.csv")
    _write_csv(path, ["t"] + psi_cols, rows)
    paths["psi"] = path

    path = os.path.join(out_dir, "auc.csv")
    _write_csv(
        path,
        ["set", "j", "k", "tau", "auc_raw", "auc_norm"],
        [[r["set"], r["j"], r["k"], _num(r["tau"]), _num(r["auc_raw"]), _num(r["auc_norm"])] for r in data.auc],
    )
    paths["auc"] = path

    if render_figures:
        from . import plots

        paths.update(plots.render_all(data, out_dir))
    return paths


def report(
    sets: list[tuple[str, ResultSet]],
    x: SparseCountTensor,
    out_dir,
    eps_values=DEFAULT_EPS_GRID,
    t_grid=None,
    taus=DEFAULT_TAUS,
    sweep_label: str | None = None,
    render_figures: bool = True,
) -> ReportData:
    """Compute all report metrics and persist them; returns the computed data."""
    data = compute_report(sets, x, eps_values=eps_values, t_grid=t_grid, taus=taus, sweep_label=sweep_label)
    data.files = write_report_files(data, out_dir, render_figures=render_figures)
    return data
