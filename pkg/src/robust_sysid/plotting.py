"""Static figures from experiment CSVs."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .experiments import CURVE_HEADER, SWEEP_HEADER, read_curve_csv, read_sweep_csv

_LABELS = {"lasso": "sum-of-norms (robust)", "least_squares": "least squares"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "robust-sysid"
    plt.rcParams["path.simplify"] = False
    return plt


def _save(fig, output_path):
    out = Path(output_path)
    fmt = out.suffix.lstrip(".").lower() or "svg"
    meta = {"svg": {"Date": None}, "pdf": {"CreationDate": None, "ModDate": None},
            "png": {"Software": None}}.get(fmt)
    fig.savefig(out, format=fmt, metadata=meta)


def _plot_curve(rows, output_path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted({r.method for r in rows}):
        by_t = {}
        for r in rows:
            if r.method == method:
                by_t.setdefault(r.t, []).append(r.err_fro)
        ts = np.array(sorted(by_t))
        q = np.array([np.nanpercentile(by_t[t], [25, 50, 75]) for t in ts])
        floor = 1e-16
        line, = ax.semilogy(ts, np.maximum(q[:, 1], floor), label=_LABELS.get(method, method))
        ax.fill_between(ts, np.maximum(q[:, 0], floor), np.maximum(q[:, 2], floor),
                        color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("t (number of transitions)")
    ax.set_ylabel(r"$\|\hat\Theta - \Theta\|_F$ (median, IQR band)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, output_path)
    plt.close(fig)


def _plot_sweep(rows, output_path):
    plt = _pyplot()
    ratio = {v: est for _, v, metric, est, _ in rows if metric == "s2_over_sc"}
    freq = [(v, est, sl) for _, v, metric, est, sl in rows if metric == "cert_frequency"]
    xs = np.array([ratio.get(v, np.nan) for v, _, _ in freq])
    ys = np.array([est for _, est, _ in freq])
    es = np.array([sl for _, _, sl in freq])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3)
    ax.set_xlabel(r"$|S|^2 / |S^c|$")
    ax.set_ylabel("certification frequency")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, output_path)
    plt.close(fig)


def emit_plots(csv_path, output_path) -> Path:
    """Render an error curve or a certification sweep, chosen by the CSV header.

    Raises ``ValueError`` (with line number) on malformed or empty input.
    """
    with open(csv_path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == CURVE_HEADER:
        rows = read_curve_csv(csv_path)
        if not rows:
            raise ValueError(f"{csv_path}:2: no data rows")
        _plot_curve(rows, output_path)
    elif header == SWEEP_HEADER:
        rows = read_sweep_csv(csv_path)
        if not rows:
            raise ValueError(f"{csv_path}:2: no data rows")
        _plot_sweep(rows, output_path)
    else:
        raise ValueError(f"{csv_path}:1: unrecognised header {header}")
    return Path(output_path)
