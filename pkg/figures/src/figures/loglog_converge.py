"""Log-log error-vs-mesh-size plot from a convergence CSV."""

from __future__ import annotations

import numpy as np

from .common import FigureSpec, finish, guide_lines, load_table, new_figure

ERROR_COLUMNS = ("err_u", "err_p", "err_X", "err_lambda")
LABELS = {"err_u": "u (H1)", "err_p": "p (L2)", "err_X": "X (H1)", "err_lambda": "lambda"}


def render(spec: FigureSpec):
    table = load_table(spec.csv_paths[0])
    h = table.numeric("h")
    fig, (ax,) = new_figure(spec)
    y_min = np.inf
    for col in ERROR_COLUMNS:
        err = table.numeric(col)
        ax.loglog(h, err, "o-", label=LABELS[col])
        y_min = min(y_min, np.nanmin(err))
    guides = spec.guides or (1.0,)
    guide_lines(ax, h, y_min, guides)
    ax.set_xlabel(spec.xlabel or "h")
    ax.set_ylabel(spec.ylabel or "error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return finish(fig, spec)
