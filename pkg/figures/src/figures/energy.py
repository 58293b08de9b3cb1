"""Energy-ratio trace of a dynamic run, log scale on the energy axis."""

from __future__ import annotations

from .common import FigureSpec, finish, load_table, new_figure


def render(spec: FigureSpec):
    table = load_table(spec.csv_paths[0])
    t = table.numeric("t")
    ratio = table.numeric("E_ratio")
    fig, (ax,) = new_figure(spec)
    ax.semilogy(t, ratio, "-", linewidth=1.2)
    ax.set_xlabel(spec.xlabel or "t")
    ax.set_ylabel(spec.ylabel or "E(t) / E(0)")
    ax.grid(True, which="both", alpha=0.3)
    return finish(fig, spec)
