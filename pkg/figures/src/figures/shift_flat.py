"""Errors and conditioning against the interface shift.

One panel per reported quantity, shift magnitude on a log axis;
the sigma = 0 rows appear as open markers one decade left of the
smallest nonzero shift.  Flat curves are the expected outcome.
"""

from __future__ import annotations

import numpy as np

from .common import FigureSpec, FigureError, finish, load_table, new_figure

QUANTITIES = ("err_u", "err_p", "err_X", "err_lambda", "cond")


def render(spec: FigureSpec):
    table = load_table(spec.csv_paths[0])
    sigma = table.numeric("sigma")
    kinds = table.text("kind")
    modes = table.text("mode")
    nonzero = np.abs(sigma[sigma != 0.0])
    if len(nonzero) == 0:
        raise FigureError(f"{spec.csv_paths[0]}: need at least one nonzero shift")
    x0 = nonzero.min() / 10.0

    fig, axes = new_figure(spec, nrows=len(QUANTITIES))
    for ax, col in zip(axes, QUANTITIES):
        vals = table.numeric(col)
        for key in sorted(set(zip(kinds, modes))):
            sel = [i for i in range(len(sigma)) if (kinds[i], modes[i]) == key]
            s = np.abs(sigma[sel])
            v = vals[sel]
            pos = s > 0
            order = np.argsort(s[pos])
            line, = ax.semilogx(s[pos][order], v[pos][order], "o-", markersize=3,
                                label=f"{key[0]} {key[1]}")
            if np.any(~pos):
                ax.semilogx([x0] * int(np.sum(~pos)), v[~pos], "o", mfc="none",
                            color=line.get_color())
        ax.set_yscale("log")
        ax.set_ylabel(col)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend(fontsize=7, ncol=2)
    axes[-1].set_xlabel(spec.xlabel or "|sigma|")
    return finish(fig, spec)
