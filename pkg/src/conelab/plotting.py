"""Figures for report projections, rendered straight to files (Agg, no pyplot state)."""
from __future__ import annotations

from collections import defaultdict

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _f(v):
    return np.nan if v in (None, "") else float(v)


def render(kind: str, columns: list, rows: list, path, title: str | None = None):
    """Write a PNG for one experiment's plot projection to ``path``."""
    fig = Figure(figsize=(5.5, 4.0), dpi=120)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    if kind == "convergence":
        series = defaultdict(list)
        for lam, R, e in rows:
            series[_f(lam)].append((_f(R), _f(e)))
        for lam, pts in sorted(series.items()):
            R, e = np.array(pts).T
            ax.loglog(R, e, "o-", label=f"lambda={lam:g}")
        ax.set_xlabel("R")
        ax.set_ylabel("max |T_R(f,g) - fg|")
        ax.legend()
    elif kind == "square_scaling":
        d = np.array([_f(r[0]) for r in rows])
        ax.loglog(d, [_f(r[1]) for r in rows], "o", label="||G_delta f||_2")
        fit = [_f(r[2]) for r in rows]
        if not np.all(np.isnan(fit)):
            ax.loglog(d, fit, "-", label="log-log fit")
        ax.set_xlabel("delta")
        ax.legend()
    else:
        y = np.array([_f(r[-1]) if not isinstance(r[-1], str) or r[-1] else np.nan for r in rows])
        ax.plot(np.arange(len(y)), y, "o")
        ax.set_xlabel("row")
        ax.set_ylabel(columns[-1])
        if np.all(y[np.isfinite(y)] > 0) and np.isfinite(y).any():
            ax.set_yscale("log")
    ax.set_title(title or kind)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    return path
