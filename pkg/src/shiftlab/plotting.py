"""Static SVG rendering of spectrum and rate curves.

Figures are byte-deterministic for fixed inputs: fixed hash salt for SVG
element ids, no creation date metadata, and fixed figure geometry.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .serialize import read_curve_csv

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "shiftlab",
    "svg.fonttype": "none",
    "path.simplify": False,
}

_LABELS = {
    "a": "Birkhoff level a",
    "s": "deviation level s",
}

_VALUE_LABELS = {
    "a": "level-set entropy h(a)",
    "s": "rate I(s)",
}


def emit_plot(csv_path: str, out_path: str, title: str | None = None) -> str:
    """Render a curve CSV to a standalone SVG file.

    Rows are grouped by their method tag; several methods in one file come
    out as an overlay with a legend. Raises SchemaMismatch for files that do
    not follow the curve schema.
    """
    label, rows = read_curve_csv(csv_path)
    groups: dict = {}
    for row in rows:
        groups.setdefault(row["method"], []).append(row)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        markers = ["o", "s", "^", "d", "v"]
        for i, (method, pts) in enumerate(sorted(groups.items())):
            xs = [p[label] for p in pts]
            ys = [p["value"] for p in pts]
            ax.plot(
                xs,
                ys,
                marker=markers[i % len(markers)],
                markersize=3,
                linewidth=1.2,
                label=method,
            )
        ax.set_xlabel(_LABELS.get(label, label))
        ax.set_ylabel(_VALUE_LABELS.get(label, "value"))
        if title:
            ax.set_title(title)
        if len(groups) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path
