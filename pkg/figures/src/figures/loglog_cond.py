"""Log-log condition-number-vs-mesh-size plot from a cond study CSV.

Slope summary rows (level == "slope") are skipped; data rows are grouped
by coupling kind and assembly mode.
"""

from __future__ import annotations

import numpy as np

from .common import FigureSpec, FigureError, finish, guide_lines, load_table, new_figure


def render(spec: FigureSpec):
    table = load_table(spec.csv_paths[0])
    levels = table.text("level")
    keep = [i for i, lv in enumerate(levels) if lv != "slope"]
    if not keep:
        raise FigureError(f"{spec.csv_paths[0]}: no data rows")
    h = table.numeric("h")[keep]
    cond = table.numeric("cond")[keep]
    kinds = table.text("kind")
    modes = table.text("mode")
    series = {}
    for pos, i in enumerate(keep):
        series.setdefault((kinds[i], modes[i]), []).append((h[pos], cond[pos]))

    fig, (ax,) = new_figure(spec)
    y_hi = 0.0
    for (kind, mode), pts in sorted(series.items()):
        pts = np.array(sorted(pts))
        ax.loglog(pts[:, 0], pts[:, 1], "o-", label=f"{kind} {mode}")
        y_hi = max(y_hi, pts[:, 1].max())
    guides = spec.guides or (-4.0, -2.0)
    guide_lines(ax, np.unique(h), y_hi, guides, flip=True)
    ax.set_xlabel(spec.xlabel or "h")
    ax.set_ylabel(spec.ylabel or "cond2")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return finish(fig, spec)
