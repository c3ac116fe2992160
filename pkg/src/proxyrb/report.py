"""Figure rendering for sweep results.

Reads the delimited sweep output and renders convergence, basis-growth, and
timing figures next to it.  Rendering is file-only (Agg backend); nothing
here opens a window.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["read_sweep_rows", "render_sweep_figures"]


def read_sweep_rows(path: str | Path) -> list[dict]:
    """Parse sweep.csv rows, skipping row-level error markers."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                rows.append({k: float(v) for k, v in row.items()})
            except (TypeError, ValueError):
                continue
    return rows


def render_sweep_figures(sweep_csv: str | Path, out_dir: str | Path) -> list[Path]:
    """Render the three standard figures from a sweep table; returns paths."""
    rows = read_sweep_rows(sweep_csv)
    if not rows:
        raise ValueError(f"no usable rows in {sweep_csv}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eps = np.array([r["epsilon"] for r in rows])
    order = np.argsort(eps)[::-1]
    eps = eps[order]
    err = np.array([r["mean_rel_l2"] for r in rows])[order]
    s = np.array([r["s"] for r in rows])[order]
    n_rb = np.array([r["n_rb"] for r in rows])[order]
    t_off = np.array([r["t_offline"] for r in rows])[order]
    t_on = np.array([r["t_online"] for r in rows])[order]
    t_fine = np.array([r["t_fine"] for r in rows])[order]
    written = []

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, err, "o-", color="tab:blue")
    ax.set_xlabel(r"selection threshold $\epsilon$")
    ax.set_ylabel(r"mean relative $L^2$ error")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = out_dir / "convergence.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogx(eps, s, "s-", label="skeletons $s$", color="tab:orange")
    ax.semilogx(eps, n_rb, "o-", label="basis size $n_{rb}$", color="tab:green")
    ax.set_xlabel(r"selection threshold $\epsilon$")
    ax.set_ylabel("count")
    ax.invert_xaxis()
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = out_dir / "basis_growth.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    idx = np.arange(eps.size)
    width = 0.35
    ax.bar(idx - width / 2, t_off + t_on, width, label="reduced (offline + online)")
    ax.bar(idx + width / 2, t_fine, width, label="all fine solves")
    ax.set_xticks(idx)
    ax.set_xticklabels([f"{e:g}" for e in eps], rotation=30)
    ax.set_xlabel(r"selection threshold $\epsilon$")
    ax.set_ylabel("seconds")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "timings.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
