"""Semi-log scatter of cut-cell areas of the tracked solid element."""

from __future__ import annotations

from .common import FigureSpec, finish, load_table, new_figure


def render(spec: FigureSpec):
    table = load_table(spec.csv_paths[0])
    t = table.numeric("t")
    area = table.numeric("area")
    fig, (ax,) = new_figure(spec)
    ax.semilogy(t, area, ".", markersize=3)
    ax.set_xlabel(spec.xlabel or "t")
    ax.set_ylabel(spec.ylabel or "cut-cell area")
    ax.grid(True, which="both", alpha=0.3)
    return finish(fig, spec)
