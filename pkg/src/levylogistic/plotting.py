"""Render long-format result rows to a PNG next to the CSV."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_YLABEL = {
    "met": "mean exit time",
    "met_physical": "mean exit time (physical units)",
    "ep": "escape probability",
    "exitprob": "P(exit at left end)",
    "density": "density",
    "stationary": "stationary density",
    "path": "X(t)",
}

PARAM_KEYS = ("alpha", "sigma", "lambda", "r", "t")


def _label(row, varying):
    return ", ".join(f"{k}={row[k]}" for k in varying) or row["quantity"]


def render(rows: list[dict], path, title: str = "") -> Path:
    """One line per (quantity, parameter set); x on the abscissa (time for paths)."""
    path = Path(path)
    curves = defaultdict(list)
    for row in rows:
        key = (row["quantity"],) + tuple(row[k] for k in PARAM_KEYS)
        curves[key].append(row)
    # only label with parameters that actually differ between curves
    varying = [k for i, k in enumerate(PARAM_KEYS) if len({key[i + 1] for key in curves}) > 1]
    quantities = sorted({key[0] for key in curves})

    fig, axes = plt.subplots(len(quantities), 1, figsize=(6, 3.6 * len(quantities)), squeeze=False)
    for ax, q in zip(axes[:, 0], quantities):
        for key, pts in curves.items():
            if key[0] != q:
                continue
            if q == "path":
                xs = [p["t"] for p in pts]
            else:
                xs = [p["x"] for p in pts]
            ax.plot(xs, [p["value"] for p in pts], lw=1.2, label=_label(pts[0], varying))
        ax.set_xlabel("t" if q == "path" else "x")
        ax.set_ylabel(_YLABEL.get(q, q))
        if len(curves) > 1:
            ax.legend(fontsize=7, frameon=False)
    if title:
        axes[0, 0].set_title(title, fontsize=9)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path
